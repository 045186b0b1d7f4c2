"""Degrade-and-refit simulation pipeline.

A baseline fit on the complete network gives the reference estimates. Each
replicate then draws a missingness indicator, applies it, and refits the
same model either treating the masked dyads as missing ("Miss", face-value
likelihood) or as absent ("Zero", zero imputation). Every replicate is keyed
by its plan coordinates, so results do not depend on execution order.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from ._rng import child_seed
from .estimate import EstimationResult, FitOptions, mcmcmle, mcmcmle_mar
from .graph import (Graph, MissMask, NodeData, PartialGraph, apply_mask,
                    degree_centralisation, zero_impute)
from .missmodels import (STUDY_FRACTIONS, ErgmMiss, classify_assumption, ergm_sweep,
                         generate, target_count)
from .sampler import SamplerConfig, sample_free
from .stats import ModelSpec, altkstar, edges, gwesp, stat_vector

log = logging.getLogger(__name__)

REPRESENTATIONS = ("Miss", "Zero")
SWEEP_PARAMS = {"theta1": "theta1_entrainment", "theta1_entrainment": "theta1_entrainment",
                "theta2": "theta2_degreecov", "theta2_degreecov": "theta2_degreecov"}
DEFAULT_LEVELS = (-1.0, -0.5, 0.0, 0.5, 1.0)


def structural_spec() -> ModelSpec:
    """Edges, AltKStar(2), GWESP(log 2)."""
    return ModelSpec([edges(), altkstar(2.0), gwesp()])


def fast_sampler(n: int, n_draws: int = 1500, seed: int = 0) -> SamplerConfig:
    """Short chains suitable for desk-scale replicate studies.

    Chains are warm started between Newton iterations, so a burn-in of a
    few sweeps over the dyads is enough after the first iteration.
    """
    N = n * (n - 1) // 2
    return SamplerConfig(burn_in=20 * N, thin=max(1, N), n_draws=n_draws, seed=seed)


@dataclass(frozen=True)
class ExperimentPlan:
    network_id: str
    spec: ModelSpec
    models: tuple
    fractions: tuple = STUDY_FRACTIONS
    representations: tuple = REPRESENTATIONS
    replicates: int = 50
    seed: int = 0
    sampler: SamplerConfig | None = None
    miss_sampler: SamplerConfig | None = None
    fit: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        models = tuple(self.models)
        if not models:
            raise ValueError("plan needs at least one missingness model")
        models = tuple(m if isinstance(m, tuple) else (type(m).__name__, m) for m in models)
        names = [name for name, _ in models]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate model names: {names}")
        object.__setattr__(self, "models", models)
        fr = tuple(float(f) for f in self.fractions)
        if not fr or any(not 0.0 < f < 1.0 for f in fr):
            raise ValueError("fractions must lie strictly between 0 and 1")
        object.__setattr__(self, "fractions", fr)
        reps = tuple(self.representations)
        if not reps or any(r not in REPRESENTATIONS for r in reps):
            raise ValueError(f"representations must be drawn from {REPRESENTATIONS}")
        object.__setattr__(self, "representations", reps)
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")

    def coordinates(self) -> list[tuple[int, int, int, int]]:
        """(model, fraction, representation, replicate) indices in canonical order."""
        return list(product(range(len(self.models)), range(len(self.fractions)),
                            range(len(self.representations)), range(self.replicates)))

    @property
    def size(self) -> int:
        return len(self.models) * len(self.fractions) * len(self.representations) * self.replicates


@dataclass
class RunRecord:
    network_id: str
    model: str
    fraction: float
    representation: str
    replicate: int
    seed: int
    assumption: str
    target_missing: int
    n_missing: int
    na_count: int
    observed_edges: int
    centralisation: float
    mu_zero: np.ndarray
    result: EstimationResult
    wall_time: float = 0.0

    @property
    def failure(self) -> str | None:
        f = self.result.failure
        if f is not None:
            return str(f)
        note = self.result.diagnostics.note
        return note if note.startswith("Error:") else None

    @property
    def converged(self) -> bool:
        return self.result.converged

    @property
    def key(self) -> tuple:
        return (self.model, self.fraction, self.representation, self.replicate)


# ---------------------------------------------------------------- single runs


def run_baseline(spec: ModelSpec, g: Graph, data: NodeData | None = None, *,
                 cfg: SamplerConfig | None = None, options: FitOptions | None = None,
                 seed: int = 0) -> EstimationResult:
    """Reference fit on the complete network."""
    c = (cfg or fast_sampler(g.n)).with_seed(child_seed(seed, 0))
    return mcmcmle(spec, g, c, data, options=options)


def _error_result(spec: ModelSpec, err: Exception, method: str) -> EstimationResult:
    from .estimate import Diagnostics

    p = len(spec)
    return EstimationResult(spec.names, np.full(p, np.nan), np.full(p, np.nan),
                            np.full((p, p), np.nan), 0, False, None,
                            Diagnostics(note=f"Error:{type(err).__name__}: {err}"),
                            method=method)


def estimate_partial(spec: ModelSpec, p: PartialGraph, representation: str,
                     cfg: SamplerConfig, data=None, options=None) -> EstimationResult:
    """Refit under one representation; exceptions become failed results."""
    method = "mcmcmle_mar" if representation == "Miss" else "mcmcmle"
    try:
        if representation == "Miss":
            return mcmcmle_mar(spec, p, cfg, data, options=options)
        return mcmcmle(spec, zero_impute(p), cfg, data, options=options)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as err:
        log.debug("estimation error: %s", err)
        return _error_result(spec, err, method)


def mean_value_zero(spec: ModelSpec, p: PartialGraph, data: NodeData | None = None,
                    network=None) -> np.ndarray:
    """Statistics of the zero-imputed graph."""
    return stat_vector(spec, zero_impute(p), data, network)


def _centralisation(g: Graph) -> float:
    return degree_centralisation(g) if g.n >= 3 else float("nan")


def _one_replicate(plan: ExperimentPlan, x: Graph, data, coord) -> RunRecord:
    mi, fi, ri, rep = coord
    name, model = plan.models[mi]
    fraction = plan.fractions[fi]
    representation = plan.representations[ri]
    seed = child_seed(plan.seed, 1, mi, fi, ri, rep)
    t0 = time.perf_counter()
    miss_cfg = plan.miss_sampler or fast_sampler(x.n, 1)
    d = generate(model, x.n, seed, fraction, x=x, cfg=miss_cfg, data=data)
    p = apply_mask(x, d)
    cfg = (plan.sampler or fast_sampler(x.n)).with_seed(child_seed(seed, 2))
    res = estimate_partial(plan.spec, p, representation, cfg, data, plan.fit)
    z = zero_impute(p)
    return RunRecord(
        network_id=plan.network_id, model=name, fraction=fraction,
        representation=representation, replicate=rep, seed=seed,
        assumption=str(classify_assumption(model)),
        target_missing=target_count(fraction, x.n_dyads), n_missing=d.missing_count,
        na_count=p.na_count if representation == "Miss" else 0,
        observed_edges=z.edge_count, centralisation=_centralisation(z),
        mu_zero=stat_vector(plan.spec, z, data), result=res,
        wall_time=time.perf_counter() - t0)


def run_replicates(plan: ExperimentPlan, x: Graph, data: NodeData | None = None, *,
                   threads: int = 1, progress=None) -> list[RunRecord]:
    """All (model, fraction, representation, replicate) runs, in coordinate order."""
    coords = plan.coordinates()

    def task(c):
        rec = _one_replicate(plan, x, data, c)
        if progress is not None:
            progress(rec)
        return rec

    if threads <= 1:
        return [task(c) for c in coords]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, coords))


# ---------------------------------------------------------------- summaries


def failure_rate(records: Sequence[RunRecord],
                 keys: Sequence[str] = ("model", "fraction", "representation")) -> list[dict]:
    """failures / total per group, with failure and success counts."""
    groups: dict[tuple, list[RunRecord]] = {}
    for r in records:
        groups.setdefault(tuple(getattr(r, k) for k in keys), []).append(r)
    rows = []
    for gk in sorted(groups, key=lambda t: tuple(str(v) for v in t)):
        rs = groups[gk]
        fails = sum(1 for r in rs if not r.converged)
        row = dict(zip(keys, gk))
        row.update(total=len(rs), failures=fails, successes=len(rs) - fails,
                   failure_rate=fails / len(rs))
        rows.append(row)
    return rows


def relative_metrics(record: RunRecord | EstimationResult,
                     baseline: EstimationResult) -> tuple[np.ndarray, np.ndarray]:
    """(rBias, rSE) = ((eta~ - eta) / eta, SE(eta~) / SE(eta)); NaN where undefined."""
    res = record.result if isinstance(record, RunRecord) else record
    eta, se0 = np.asarray(baseline.theta_hat, float), np.asarray(baseline.se, float)
    est, se1 = np.asarray(res.theta_hat, float), np.asarray(res.se, float)
    if not (res.converged and baseline.converged):
        return np.full(eta.shape, np.nan), np.full(eta.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        rbias = np.where(eta != 0.0, (est - eta) / np.where(eta != 0.0, eta, 1.0), np.nan)
        rse = np.where(se0 != 0.0, se1 / np.where(se0 != 0.0, se0, 1.0), np.nan)
    return rbias, rse


def aggregate_relative(records: Iterable[RunRecord], baseline: EstimationResult,
                       keys: Sequence[str] = ("model", "fraction", "representation")) -> list[dict]:
    """Mean rBias and rSE per group over converged runs with defined components."""
    groups: dict[tuple, list[RunRecord]] = {}
    for r in records:
        groups.setdefault(tuple(getattr(r, k) for k in keys), []).append(r)
    rows = []
    for gk in sorted(groups, key=lambda t: tuple(str(v) for v in t)):
        rb, rs = zip(*(relative_metrics(r, baseline) for r in groups[gk]))
        rb, rs = np.array(rb), np.array(rs)
        for k, name in enumerate(baseline.names):
            row = dict(zip(keys, gk))
            ok = np.isfinite(rb[:, k])
            row.update(term=name, n_used=int(ok.sum()),
                       rbias=float(rb[ok, k].mean()) if ok.any() else float("nan"),
                       rse=float(rs[ok, k].mean()) if ok.any() else float("nan"))
            rows.append(row)
    return rows


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepPlan:
    parameter: str = "theta1_entrainment"
    levels: tuple = DEFAULT_LEVELS
    fraction: float = 0.35
    replicates: int = 50
    seed: int = 0
    sampler: SamplerConfig | None = None
    miss_sampler: SamplerConfig | None = None
    fit: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMS:
            raise ValueError(f"sweep parameter must be one of {sorted(SWEEP_PARAMS)}")
        object.__setattr__(self, "parameter", SWEEP_PARAMS[self.parameter])
        lv = tuple(float(v) for v in self.levels)
        if not lv:
            raise ValueError("sweep needs at least one level")
        object.__setattr__(self, "levels", lv)
        if not 0.0 < self.fraction < 1.0:
            raise ValueError("fraction must lie strictly between 0 and 1")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")

    def model(self, level: float) -> ErgmMiss:
        if self.parameter == "theta1_entrainment":
            return ergm_sweep(theta1=level)
        return ergm_sweep(theta2=level)


@dataclass
class SweepRun:
    level: float
    replicate: int
    seed: int
    observed_edges: int
    centralisation: float
    mu_zero: np.ndarray
    result: EstimationResult


@dataclass
class SweepTable:
    """Per-level summaries; ``rows`` holds one dict per level and quantity."""

    parameter: str
    levels: tuple
    names: list
    rows: list
    runs: list
    baseline: np.ndarray | None = None
    observed_stats: np.ndarray | None = None

    def column(self, quantity: str, what: str = "mean") -> np.ndarray:
        vals = {r["level"]: r[what] for r in self.rows if r["quantity"] == quantity}
        return np.array([vals[v] for v in self.levels])


def _band(values: np.ndarray) -> tuple[float, float, float]:
    if values.size == 0:
        return float("nan"), float("nan"), float("nan")
    lo, hi = np.percentile(values, [2.5, 97.5])
    return float(values.mean()), float(lo), float(hi)


def _sweep_one(plan: SweepPlan, x: Graph, spec: ModelSpec, data, li: int, rep: int) -> SweepRun:
    level = plan.levels[li]
    seed = child_seed(plan.seed, 3, li, rep)
    miss_cfg = (plan.miss_sampler or fast_sampler(x.n, 1)).with_seed(seed)
    d = generate(plan.model(level), x.n, seed, plan.fraction, x=x, cfg=miss_cfg)
    p = apply_mask(x, d)
    cfg = (plan.sampler or fast_sampler(x.n)).with_seed(child_seed(seed, 2))
    res = estimate_partial(spec, p, "Miss", cfg, data, plan.fit)
    z = zero_impute(p)
    return SweepRun(level, rep, seed, z.edge_count, _centralisation(z),
                    stat_vector(spec, z, data), res)


def mnar_sweep(plan: SweepPlan, x: Graph, spec: ModelSpec | None = None,
               data: NodeData | None = None, *, baseline: EstimationResult | None = None,
               threads: int = 1) -> SweepTable:
    """Sensitivity of estimates and observed statistics to one MNAR parameter.

    For each level, masks are drawn from the ERGM missingness model with only
    the swept parameter nonzero at a fixed fraction, the network is refitted
    treating masked dyads as missing, and means plus empirical 2.5/97.5
    percentiles are reported. Failed fits are excluded from the estimate
    bands and counted.
    """
    spec = spec or structural_spec()
    coords = list(product(range(len(plan.levels)), range(plan.replicates)))

    def task(c):
        return _sweep_one(plan, x, spec, data, *c)

    if threads <= 1:
        runs = [task(c) for c in coords]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(task, coords))
    rows = []
    for level in plan.levels:
        rs = [r for r in runs if r.level == level]
        ok = [r for r in rs if r.result.converged]
        n_fail = len(rs) - len(ok)

        def add(quantity, values, used):
            m, lo, hi = _band(np.asarray(values, dtype=float))
            rows.append(dict(level=level, quantity=quantity, mean=m, lo=lo, hi=hi,
                             n_used=used, n_failed=n_fail))

        for k, name in enumerate(spec.names):
            add(f"theta:{name}", [r.result.theta_hat[k] for r in ok], len(ok))
        for k, name in enumerate(spec.names):
            add(f"mu_zero:{name}", [r.mu_zero[k] for r in rs], len(rs))
        add("observed_edges", [r.observed_edges for r in rs], len(rs))
        add("centralisation", [r.centralisation for r in rs], len(rs))
    base = None if baseline is None else np.asarray(baseline.theta_hat, float)
    return SweepTable(plan.parameter, plan.levels, spec.names, rows, runs, base,
                      stat_vector(spec, x, data))


# ---------------------------------------------------------------- fixtures


FIXTURE_PARAMS = {
    # n, terms, parameters
    "sweep": (30, (-2.0, -0.5, 1.0)),
    "sparse": (30, (-2.6, -0.3, 1.0)),
}


def synthetic_network(kind: str = "sweep", seed: int = 2024) -> Graph:
    """Deterministic stand-in networks.

    ``sweep`` and ``sparse`` are ERGM draws (Edges, AltKStar(2), GWESP(log 2))
    on 30 nodes. ``central`` is a core of three hubs attached to most other
    nodes plus sparse periphery ties; ``dense`` is a 30-node graph with
    density near 0.85 in which a few nodes are adjacent to everyone.
    """
    from ._rng import make_rng

    if kind in FIXTURE_PARAMS:
        n, theta = FIXTURE_PARAMS[kind]
        spec = structural_spec().with_theta(theta)
        cfg = SamplerConfig(burn_in=20_000 * n, thin=1, n_draws=1, seed=seed)
        return sample_free(spec, n, cfg, key=(99,)).last
    rng = make_rng(seed, 98, len(kind))
    n = 30
    if kind == "central":
        a = np.zeros((n, n), dtype=np.uint8)
        hubs = [0, 1, 2]
        for h in hubs:
            others = rng.random(n) < 0.7
            a[h, others] = 1
        a[0, 1] = a[0, 2] = a[1, 2] = 1
        periphery = rng.random((n, n)) < 0.03
        a |= periphery.astype(np.uint8)
    elif kind == "dense":
        a = (rng.random((n, n)) < 0.8).astype(np.uint8)
        a[:4, :] = 1
    else:
        raise ValueError(f"unknown fixture {kind!r}")
    a = np.triu(a, 1)
    a = a | a.T
    return Graph(a)


def records_for(records: Sequence[RunRecord], **where) -> list[RunRecord]:
    return [r for r in records if all(getattr(r, k) == v for k, v in where.items())]


def with_replicates(plan: ExperimentPlan, replicates: int) -> ExperimentPlan:
    return replace(plan, replicates=replicates)
