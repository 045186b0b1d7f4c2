"""Command line interface: ``ergmiss <subcommand> [options]``.

Exit status 0 on success (estimation failures are data, not errors), 2 for
invalid configuration or arguments, 3 for unreadable or malformed data.
Errors are reported on stderr as one JSON object ``{"error": ..., "message": ...}``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config, model_from_config
from .files import DataError, load_network
from .output import OutputError, emit_outputs, write_dicts, write_json

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

log = logging.getLogger("ergmiss")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p):
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--seed", type=int, help="base seed (overrides the config)")
    p.add_argument("--threads", type=int, help="worker threads")
    p.add_argument("--out", help="output directory (overrides the config)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ergmiss", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="baseline MCMC MLE on the complete network")
    _common(p)
    p.add_argument("--edges")
    p.add_argument("--attrs")
    p.add_argument("--terms", help="comma-separated terms, e.g. edges,gwesp(log(2))")

    p = sub.add_parser("degrade", help="draw missingness masks and write partial graphs")
    _common(p)

    p = sub.add_parser("experiment", help="full degrade-and-refit plan")
    _common(p)
    p.add_argument("--replicates", type=int)

    p = sub.add_parser("sweep", help="MNAR sensitivity sweep")
    _common(p)
    p.add_argument("--param", choices=["theta1", "theta2"])
    p.add_argument("--levels", help="comma-separated levels")
    p.add_argument("--replicates", type=int)

    p = sub.add_parser("marlab", help="print bivariate missingness mechanisms")
    _common(p)

    p = sub.add_parser("enumerate", help="exact moments of a tiny ERGM")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--terms", default="edges,gwesp(log(2))")
    p.add_argument("--theta", default=None, help="comma-separated parameters")
    return ap


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _split_terms(text: str) -> list[str]:
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
            continue
        depth += (ch == "(") - (ch == ")")
        cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if cfg.network.edges is None and cfg.network.fixture is None:
        cfg.network.fixture = "sweep"
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be non-negative")
        cfg.seed = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg.threads = args.threads
    if args.out is not None:
        cfg.out = args.out
    return cfg


def _network(cfg: RunConfig):
    from ..experiment import synthetic_network
    from ..graph import NodeData

    nc = cfg.network
    if nc.edges is not None:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        g, data, _ = load_network(cfg.resolve(nc.edges), cfg.resolve(nc.attrs), nc.schema,
                                  label_map_path=out / "labels.json")
        return g, data
    try:
        return synthetic_network(nc.fixture, nc.fixture_seed), NodeData(30)
    except ValueError as err:
        raise ConfigError(f"network.fixture: {err}") from None


def _out(cfg) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_fit(args) -> int:
    from ..experiment import run_baseline

    cfg = _config(args)
    if args.edges:
        cfg.network.edges, cfg.network.fixture, cfg.network.attrs = args.edges, None, args.attrs
        cfg.base_dir = "."
    if args.terms:
        cfg.terms = _split_terms(args.terms)
        try:
            cfg.spec()
        except ValueError as err:
            raise ConfigError(f"--terms: {err}") from None
    g, data = _network(cfg)
    res = run_baseline(cfg.spec(), g, data, cfg=cfg.sampler_config(g.n),
                       options=cfg.fit_options(), seed=cfg.seed)
    path = write_json({"fit": res.as_dict()}, _out(cfg) / "fit.json", cfg.hash(), cfg.seed)
    print(json.dumps(res.as_dict()))
    log.info("wrote %s", path)
    return EXIT_OK


def _plan(cfg: RunConfig, network_id: str):
    from ..experiment import ExperimentPlan

    models = tuple((m, model_from_config(m, cfg.model_params.get(m))) for m in cfg.models)
    return ExperimentPlan(network_id, cfg.spec(), models, tuple(cfg.fractions),
                          tuple(cfg.representations), cfg.replicates, cfg.seed,
                          sampler=None, miss_sampler=None, fit=cfg.fit_options())


def cmd_degrade(args) -> int:
    from .._rng import child_seed
    from ..graph import apply_mask
    from ..missmodels import generate

    cfg = _config(args)
    g, data = _network(cfg)
    plan = _plan(cfg, cfg.network.id)
    miss_cfg = cfg.missing_sampler_config(g.n)
    masks, partial = [], []
    for mi, (name, model) in enumerate(plan.models):
        for fi, f in enumerate(plan.fractions):
            for rep in range(plan.replicates):
                seed = child_seed(plan.seed, 1, mi, fi, 0, rep)
                d = generate(model, g.n, seed, f, x=g, cfg=miss_cfg, data=data)
                p = apply_mask(g, d)
                masks.append(dict(model=name, fraction=f, replicate=rep, seed=seed,
                                  n_missing=d.missing_count,
                                  missing=";".join(f"{i}-{j}" for i, j in d.edges())))
                st = p.state
                for i, j in zip(*np.triu_indices(g.n, 1)):
                    if st[i, j] != 0:
                        partial.append(dict(model=name, fraction=f, replicate=rep,
                                            source=int(i), target=int(j),
                                            state="NA" if st[i, j] < 0 else "1"))
    out = _out(cfg)
    write_dicts(masks, out / "masks.csv",
                ["model", "fraction", "replicate", "seed", "n_missing", "missing"],
                cfg.hash(), cfg.seed)
    write_dicts(partial, out / "partial_graphs.csv",
                ["model", "fraction", "replicate", "source", "target", "state"],
                cfg.hash(), cfg.seed)
    print(json.dumps({"masks": len(masks), "out": str(out)}))
    return EXIT_OK


def cmd_experiment(args) -> int:
    from ..experiment import aggregate_relative, failure_rate, run_baseline, run_replicates

    cfg = _config(args)
    if args.replicates is not None:
        cfg.replicates = args.replicates
    g, data = _network(cfg)
    spec = cfg.spec()
    plan = _plan(cfg, cfg.network.id)
    plan = replace(plan, sampler=cfg.sampler_config(g.n),
                   miss_sampler=cfg.missing_sampler_config(g.n))
    base = run_baseline(spec, g, data, cfg=cfg.sampler_config(g.n), options=cfg.fit_options(),
                        seed=cfg.seed)
    records = run_replicates(plan, g, data, threads=cfg.threads)
    h, out = cfg.hash(), _out(cfg)
    emit_outputs(out, records=records, names=spec.names, config_hash=h, seed=cfg.seed,
                 extra_tables={"failure_rates": failure_rate(records),
                               "relative_metrics": aggregate_relative(records, base)})
    write_json({"baseline": base.as_dict()}, out / "baseline.json", h, cfg.seed)
    print(json.dumps({"records": len(records), "failures": sum(not r.converged for r in records),
                      "out": str(out)}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    from ..experiment import SweepPlan, mnar_sweep, run_baseline

    cfg = _config(args)
    if args.param:
        cfg.sweep_parameter = args.param
    if args.levels:
        cfg.sweep_levels = _floats(args.levels, "--levels")
        if not cfg.sweep_levels:
            raise UsageError("--levels must not be empty")
    if args.replicates is not None:
        cfg.sweep_replicates = args.replicates
    g, data = _network(cfg)
    spec = cfg.spec()
    base = run_baseline(spec, g, data, cfg=cfg.sampler_config(g.n), options=cfg.fit_options(),
                        seed=cfg.seed)
    plan = SweepPlan(cfg.sweep_parameter, tuple(cfg.sweep_levels), cfg.sweep_fraction,
                     cfg.sweep_replicates, cfg.seed, cfg.sampler_config(g.n),
                     cfg.missing_sampler_config(g.n), cfg.fit_options())
    table = mnar_sweep(plan, g, spec, data, baseline=base, threads=cfg.threads)
    files = emit_outputs(_out(cfg), sweep=table, config_hash=cfg.hash(), seed=cfg.seed)
    print(json.dumps({"levels": list(plan.levels), "files": [str(f) for f in files]}))
    return EXIT_OK


def cmd_marlab(args) -> int:
    from ..marlab import build_mar_pair, format_mechanism, independent_pair

    cases = [
        ("constant components", build_mar_pair(0.1, 0.1, 0.05)),
        ("MAR pair, g10 depends on x_ik", build_mar_pair([0.1, 0.3], 0.1, 0.05)),
        ("independent per-variable construction", independent_pair([0.1, 0.4], [0.2, 0.3])),
    ]
    for title, mech in cases:
        print(f"== {title}")
        print(format_mechanism(mech))
        print()
    return EXIT_OK


def cmd_enumerate(args) -> int:
    from ..sampler import MAX_EXACT_N, enumerate_exact
    from ..stats import ModelSpec, parse_term

    if args.n > MAX_EXACT_N or args.n < 2:
        raise UsageError(f"--n must lie in [2, {MAX_EXACT_N}] for exact enumeration")
    try:
        terms = [parse_term(t) for t in _split_terms(args.terms)]
        theta = None if args.theta is None else _floats(args.theta, "--theta")
        spec = ModelSpec(terms, theta)
    except ValueError as err:
        raise UsageError(str(err)) from None
    ex = enumerate_exact(spec, args.n)
    doc = {"n": args.n, "terms": spec.names, "theta": spec.theta.tolist(),
           "log_normaliser": ex.kappa, "mean": ex.mean.tolist(), "cov": ex.cov.tolist()}
    print(json.dumps(doc))
    if args.out:
        write_json({"enumerate": doc}, Path(args.out) / "enumerate.json", "none",
                   args.seed or 0)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "degrade": cmd_degrade, "experiment": cmd_experiment,
            "sweep": cmd_sweep, "marlab": cmd_marlab, "enumerate": cmd_enumerate}


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def _join_values(argv):
    # "--levels -1,-0.5,0" would read "-1,..." as an option
    argv = list(sys.argv[1:] if argv is None else argv)
    out = []
    k = 0
    while k < len(argv):
        if argv[k] in ("--levels", "--theta") and k + 1 < len(argv):
            out.append(f"{argv[k]}={argv[k + 1]}")
            k += 2
        else:
            out.append(argv[k])
            k += 1
    return out


def run_cli(argv=None) -> int:
    try:
        args = build_parser().parse_args(_join_values(argv))
    except UsageError as err:
        return _fail("UsageError", str(err), EXIT_CONFIG)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as err:
        return _fail(type(err).__name__, str(err), EXIT_CONFIG)
    except DataError as err:
        return _fail("DataError", str(err), EXIT_DATA)
    except OutputError as err:
        return _fail("OutputError", str(err), EXIT_DATA)
    except ValueError as err:
        # e.g. a covariate term on a network without that attribute
        return _fail("InvalidInput", str(err), EXIT_CONFIG)


def main():
    sys.exit(run_cli())
