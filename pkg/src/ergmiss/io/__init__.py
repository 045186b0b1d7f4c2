"""File formats, configuration, outputs and the command line."""
from .config import ConfigError, RunConfig, load_config, parse_config
from .files import DataError, load_network, read_attributes, read_edge_list, save_network
from .output import emit_outputs, record_columns, write_records

__all__ = [
    "ConfigError", "RunConfig", "load_config", "parse_config", "DataError", "load_network",
    "read_attributes", "read_edge_list", "save_network", "emit_outputs", "record_columns",
    "write_records",
]
