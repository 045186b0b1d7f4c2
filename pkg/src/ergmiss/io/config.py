"""TOML run configuration with strict validation.

Example::

    seed = 7
    out = "results"

    [network]
    fixture = "sweep"          # or: edges = "net.csv", attrs = "attrs.csv"

    [model]
    terms = ["edges", "altkstar(2)", "gwesp(log(2))"]

    [sampler]
    burn_in = 8700
    thin = 435
    n_draws = 1500

    [experiment]
    models = ["hbern", "latent", "ergm_mcar_t3", "ergm_mnar_t3"]
    fractions = [0.10, 0.35, 0.60]
    replicates = 50

Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..estimate import FitOptions
from ..experiment import DEFAULT_LEVELS, REPRESENTATIONS, SWEEP_PARAMS
from ..missmodels import STUDY_FRACTIONS, PRESETS
from ..sampler import SamplerConfig
from ..stats import ModelSpec, parse_term


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "seed": None, "threads": None, "out": None,
    "network": {"id", "edges", "attrs", "fixture", "fixture_seed", "schema"},
    "model": {"terms"},
    "sampler": {"burn_in", "thin", "n_draws"},
    "missing_sampler": {"burn_in", "thin"},
    "fit": {"tol", "max_iter", "ess_target", "cond_max"},
    "experiment": {"models", "fractions", "representations", "replicates", "params"},
    "sweep": {"parameter", "levels", "fraction", "replicates"},
}


@dataclass
class NetworkConfig:
    id: str = "network"
    edges: str | None = None
    attrs: str | None = None
    fixture: str | None = None
    fixture_seed: int = 2024
    schema: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    seed: int = 0
    threads: int = 1
    out: str = "results"
    network: NetworkConfig = field(default_factory=NetworkConfig)
    terms: list = field(default_factory=lambda: ["edges", "altkstar(2)", "gwesp(log(2))"])
    sampler: dict = field(default_factory=dict)
    missing_sampler: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    models: list = field(default_factory=lambda: ["hbern", "latent", "ergm_mcar_t3",
                                                  "ergm_mnar_t3"])
    model_params: dict = field(default_factory=dict)
    fractions: list = field(default_factory=lambda: list(STUDY_FRACTIONS))
    representations: list = field(default_factory=lambda: list(REPRESENTATIONS))
    replicates: int = 50
    sweep_parameter: str = "theta1"
    sweep_levels: list = field(default_factory=lambda: list(DEFAULT_LEVELS))
    sweep_fraction: float = 0.35
    sweep_replicates: int = 50
    base_dir: str = "."

    def spec(self) -> ModelSpec:
        return ModelSpec([parse_term(t) for t in self.terms])

    def sampler_config(self, n: int) -> SamplerConfig:
        from ..experiment import fast_sampler

        base = fast_sampler(n)
        s = self.sampler
        return SamplerConfig(s.get("burn_in", base.burn_in), s.get("thin", base.thin),
                             s.get("n_draws", base.n_draws), self.seed)

    def missing_sampler_config(self, n: int) -> SamplerConfig:
        from ..experiment import fast_sampler

        base = fast_sampler(n, 1)
        s = self.missing_sampler
        return SamplerConfig(s.get("burn_in", base.burn_in), s.get("thin", base.thin), 1,
                             self.seed, "swap")

    def fit_options(self) -> FitOptions:
        return FitOptions(**self.fit)

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d.pop("threads")
        d.pop("out")
        return d

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _check_keys(table: dict, allowed: set, where: str):
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in [{where}]: {sorted(extra)}")


def _typed(value, kind, where):
    ok = {
        int: lambda v: isinstance(v, int) and not isinstance(v, bool),
        float: lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
        str: lambda v: isinstance(v, str),
    }[kind](value)
    if not ok:
        raise ConfigError(f"{where} must be {kind.__name__}, got {value!r}")
    return kind(value)


def _list(value, kind, where):
    if not isinstance(value, list):
        raise ConfigError(f"{where} must be a list")
    return [_typed(v, kind, f"{where}[{k}]") for k, v in enumerate(value)]


def parse_config(doc: dict, base_dir=".") -> RunConfig:
    """Validate a parsed TOML document."""
    _check_keys(doc, set(_SECTIONS), "top level")
    cfg = RunConfig(base_dir=str(base_dir))
    if "seed" in doc:
        cfg.seed = _typed(doc["seed"], int, "seed")
        if cfg.seed < 0:
            raise ConfigError("seed must be non-negative")
    if "threads" in doc:
        cfg.threads = _typed(doc["threads"], int, "threads")
    if "out" in doc:
        cfg.out = _typed(doc["out"], str, "out")
    for name, keys in _SECTIONS.items():
        if keys is not None and name in doc:
            if not isinstance(doc[name], dict):
                raise ConfigError(f"[{name}] must be a table")
            _check_keys(doc[name], keys, name)

    net = doc.get("network", {})
    nc = NetworkConfig()
    for k in ("id", "edges", "attrs", "fixture"):
        if k in net:
            setattr(nc, k, _typed(net[k], str, f"network.{k}"))
    if "fixture_seed" in net:
        nc.fixture_seed = _typed(net["fixture_seed"], int, "network.fixture_seed")
    if "schema" in net:
        sch = net["schema"]
        if not isinstance(sch, dict) or any(v not in ("numeric", "categorical")
                                             for v in sch.values()):
            raise ConfigError("network.schema maps column names to 'numeric' or 'categorical'")
        nc.schema = dict(sch)
    if nc.edges is not None and nc.fixture is not None:
        raise ConfigError("give either network.edges or network.fixture, not both")
    if nc.attrs is not None and nc.edges is None:
        raise ConfigError("network.attrs needs network.edges")
    cfg.network = nc

    if "model" in doc:
        cfg.terms = _list(doc["model"].get("terms", cfg.terms), str, "model.terms")
        if not cfg.terms:
            raise ConfigError("model.terms must not be empty")
    try:
        cfg.spec()
    except ValueError as err:
        raise ConfigError(f"model.terms: {err}") from None

    for sect in ("sampler", "missing_sampler"):
        if sect in doc:
            vals = {k: _typed(v, int, f"{sect}.{k}") for k, v in doc[sect].items()}
            setattr(cfg, sect, vals)
    try:
        SamplerConfig(cfg.sampler.get("burn_in"), cfg.sampler.get("thin"),
                      cfg.sampler.get("n_draws", 1))
        SamplerConfig(cfg.missing_sampler.get("burn_in"), cfg.missing_sampler.get("thin"))
    except ValueError as err:
        raise ConfigError(f"sampler: {err}") from None

    if "fit" in doc:
        f = doc["fit"]
        cfg.fit = {k: (_typed(v, int, f"fit.{k}") if k == "max_iter" else
                       _typed(v, float, f"fit.{k}")) for k, v in f.items()}

    ex = doc.get("experiment", {})
    if "models" in ex:
        cfg.models = _list(ex["models"], str, "experiment.models")
    for m in cfg.models:
        if m not in PRESETS:
            raise ConfigError(f"unknown missingness model {m!r}; choose from {sorted(PRESETS)}")
    if "params" in ex:
        params = ex["params"]
        if not isinstance(params, dict):
            raise ConfigError("experiment.params must be a table of tables")
        for m, p in params.items():
            if m not in cfg.models:
                raise ConfigError(f"experiment.params.{m}: model not in experiment.models")
            if not isinstance(p, dict):
                raise ConfigError(f"experiment.params.{m} must be a table")
        cfg.model_params = {m: dict(p) for m, p in params.items()}
        for m in cfg.model_params:
            try:
                model_from_config(m, cfg.model_params[m])
            except (TypeError, ValueError) as err:
                raise ConfigError(f"experiment.params.{m}: {err}") from None
    if "fractions" in ex:
        cfg.fractions = _list(ex["fractions"], float, "experiment.fractions")
    if not cfg.fractions or any(not 0.0 < f < 1.0 for f in cfg.fractions):
        raise ConfigError("experiment.fractions must be nonempty and inside (0, 1)")
    if "representations" in ex:
        cfg.representations = _list(ex["representations"], str, "experiment.representations")
        if not cfg.representations or any(r not in REPRESENTATIONS for r in cfg.representations):
            raise ConfigError(f"experiment.representations must be drawn from {REPRESENTATIONS}")
    if "replicates" in ex:
        cfg.replicates = _typed(ex["replicates"], int, "experiment.replicates")
    if cfg.replicates < 1:
        raise ConfigError("experiment.replicates must be >= 1")

    sw = doc.get("sweep", {})
    if "parameter" in sw:
        cfg.sweep_parameter = _typed(sw["parameter"], str, "sweep.parameter")
    if cfg.sweep_parameter not in SWEEP_PARAMS:
        raise ConfigError(f"sweep.parameter must be one of {sorted(SWEEP_PARAMS)}")
    if "levels" in sw:
        cfg.sweep_levels = _list(sw["levels"], float, "sweep.levels")
    if not cfg.sweep_levels:
        raise ConfigError("sweep.levels must not be empty")
    if "fraction" in sw:
        cfg.sweep_fraction = _typed(sw["fraction"], float, "sweep.fraction")
    if not 0.0 < cfg.sweep_fraction < 1.0:
        raise ConfigError("sweep.fraction must lie in (0, 1)")
    if "replicates" in sw:
        cfg.sweep_replicates = _typed(sw["replicates"], int, "sweep.replicates")
    if cfg.sweep_replicates < 1:
        raise ConfigError("sweep.replicates must be >= 1")
    return cfg


def model_from_config(name: str, params: dict | None = None):
    from ..missmodels import preset

    params = dict(params or {})
    for k, v in params.items():
        if isinstance(v, list):
            params[k] = tuple(v)
    return preset(name, **params)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as err:
        raise ConfigError(f"{path}: cannot read config ({err.strerror})") from err
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from err
    return parse_config(doc, base_dir=path.parent)


def config_summary(cfg: RunConfig) -> dict[str, Any]:
    return cfg.canonical()
