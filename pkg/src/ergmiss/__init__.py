"""Missing-data mechanisms for undirected networks: simulate, degrade, re-estimate."""
from .graph import (Graph, MissMask, NodeData, PartialGraph, apply_mask, degree_centralisation,
                    degree_sequence, density, zero_impute)
from .stats import ModelSpec, Term, change_stat, parse_term, stat_vector

__version__ = "0.1.0"

__all__ = [
    "Graph", "MissMask", "NodeData", "PartialGraph", "apply_mask", "degree_centralisation",
    "degree_sequence", "density", "zero_impute", "ModelSpec", "Term", "change_stat",
    "parse_term", "stat_vector",
]
