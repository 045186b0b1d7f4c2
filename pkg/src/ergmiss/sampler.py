"""Metropolis-Hastings samplers over graph space and an exact oracle.

Three chains share one kernel family:

* :func:`sample_free` toggles uniformly chosen dyads,
* :func:`sample_fixed_count` swaps an edge with a non-edge, holding the edge
  count fixed,
* :func:`sample_conditional` toggles only the NA dyads of a partial graph.

Random numbers are drawn in blocks from a Philox generator and handed to the
kernels, so a given seed yields the same draws with or without numba.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from . import _kernels as K
from ._rng import make_rng
from .graph import NA, Graph, NodeData, PartialGraph, dyad_index, n_dyads
from .stats import ModelSpec, compile_terms, kernel_state, stat_vector

CHUNK = 1 << 16
MAX_EXACT_N = 5


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length settings. ``None`` burn-in/thin resolve to 10^4 N and N."""

    burn_in: int | None = None
    thin: int | None = None
    n_draws: int = 1000
    seed: int = 0
    proposal: str = "toggle"

    def __post_init__(self):
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thin is not None and self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.n_draws < 1:
            raise ValueError("n_draws must be >= 1")
        if self.proposal not in ("toggle", "swap"):
            raise ValueError("proposal must be 'toggle' or 'swap'")

    def resolve(self, N: int) -> tuple[int, int]:
        burn = 10_000 * N if self.burn_in is None else self.burn_in
        thin = max(N, 1) if self.thin is None else self.thin
        return burn, thin

    def with_seed(self, seed: int) -> "SamplerConfig":
        return SamplerConfig(self.burn_in, self.thin, self.n_draws, int(seed), self.proposal)


@dataclass
class SampleBatch:
    stats: np.ndarray
    acceptance_rate: float
    ess: np.ndarray
    last: Graph
    codes: np.ndarray | None = None

    @property
    def n_draws(self) -> int:
        return self.stats.shape[0]

    def mean(self) -> np.ndarray:
        return self.stats.mean(axis=0)

    def cov(self) -> np.ndarray:
        return np.atleast_2d(np.cov(self.stats, rowvar=False, bias=False)) \
            if self.n_draws > 1 else np.zeros((self.stats.shape[1],) * 2)


def effective_sample_size(x) -> float:
    """Geyer initial positive sequence ESS of a 1-d chain, clipped to [1, len]."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 4:
        return float(n)
    xc = x - x.mean()
    var = float(np.dot(xc, xc)) / n
    if var <= 1e-12 * max(1.0, float(np.abs(x).max()) ** 2):
        return float(n)
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    rho = acov / acov[0]
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
    return float(min(n, max(1.0, n / max(tau, 1e-12))))


def ess_per_stat(stats: np.ndarray) -> np.ndarray:
    return np.array([effective_sample_size(stats[:, k]) for k in range(stats.shape[1])])


class _Chain:
    """Mutable chain state threaded through kernel calls."""

    def __init__(self, comp, theta, g: Graph, data, network, spec):
        self.comp = comp
        self.theta = np.ascontiguousarray(theta, dtype=float)
        self.adj, self.deg, self.sp = kernel_state(g)
        self.stats = stat_vector(spec, g, data, network)
        N = g.n_dyads
        self.track = N <= 62
        self.code = _graph_code(g) if self.track else 0
        di, dj = dyad_index(g.n)
        self.di, self.dj = di, dj


def _graph_code(g: Graph) -> int:
    bits = g.dyads()
    return int(np.sum(bits.astype(np.int64) << np.arange(bits.shape[0], dtype=np.int64)))


def _run_toggle(chain: _Chain, allowed: np.ndarray, cfg: SamplerConfig, rng) -> SampleBatch:
    burn, thin = cfg.resolve(chain.di.shape[0])
    total = burn + thin * cfg.n_draws
    p = chain.comp.p
    draws = np.zeros((cfg.n_draws, p))
    codes = np.zeros(cfg.n_draws, dtype=np.int64)
    rec, accepted, start = 0, 0, 0
    code = np.int64(chain.code)
    c = chain.comp
    while start < total:
        m = min(CHUNK, total - start)
        u = rng.random((2, m))
        log_u = np.log(u[1])
        acc, rec, code = K.run_toggles(
            chain.adj, chain.deg, chain.sp, c.need_sp, chain.stats, chain.theta,
            c.kinds, c.scale, c.weights, c.rpow, allowed, chain.di, chain.dj,
            u[0], log_u, start, burn, thin, draws, codes, rec, code, chain.track)
        accepted += acc
        start += m
    chain.code = int(code)
    return SampleBatch(
        stats=draws,
        acceptance_rate=accepted / total if total else 0.0,
        ess=ess_per_stat(draws),
        last=Graph._trusted(chain.adj.copy()),
        codes=codes if chain.track else None,
    )


def _rng_for(cfg: SamplerConfig, key):
    return make_rng(cfg.seed, *key)


def sample_free(spec: ModelSpec, n: int, cfg: SamplerConfig, data: NodeData | None = None,
                *, network=None, init: Graph | None = None, key=(0,)) -> SampleBatch:
    """Draws from the ERGM with parameters ``spec.theta`` on ``n`` vertices."""
    g0 = Graph.empty(n) if init is None else init
    if g0.n != n:
        raise ValueError("initial graph has the wrong size")
    comp = compile_terms(spec, n, data, network)
    chain = _Chain(comp, spec.theta, g0, data, network, spec)
    allowed = np.arange(n_dyads(n), dtype=np.int64)
    return _run_toggle(chain, allowed, cfg, _rng_for(cfg, key))


def sample_conditional(spec: ModelSpec, p: PartialGraph, cfg: SamplerConfig,
                       data: NodeData | None = None, *, network=None,
                       init: Graph | None = None, key=(1,)) -> SampleBatch:
    """Draws of the completed graph given the observed dyads of ``p``."""
    rng = _rng_for(cfg, key)
    na = p.na_dyads()
    n = p.n
    if init is None:
        obs = p.observed_count
        dens = p.observed_edge_count / obs if obs else 0.5
        fill = (rng.random(na.shape[0]) < dens).astype(np.uint8)
        vals = p.dyads()
        vals[na] = fill
        g0 = Graph.from_dyads(n, vals)
    else:
        g0 = init
        obs_mask = p.state != NA
        if not np.array_equal(g0.adj[obs_mask], p.state[obs_mask].astype(np.uint8)):
            raise ValueError("initial graph disagrees with observed dyads")
    comp = compile_terms(spec, n, data, network)
    chain = _Chain(comp, spec.theta, g0, data, network, spec)
    if na.shape[0] == 0:
        draws = np.tile(chain.stats, (cfg.n_draws, 1))
        codes = np.full(cfg.n_draws, chain.code, dtype=np.int64) if chain.track else None
        return SampleBatch(draws, 0.0, np.full(comp.p, float(cfg.n_draws)), g0, codes)
    return _run_toggle(chain, na.astype(np.int64), cfg, rng)


def sample_fixed_count(spec: ModelSpec, n: int, m: int, cfg: SamplerConfig,
                       data: NodeData | None = None, *, network=None,
                       init: Graph | None = None, key=(2,)) -> SampleBatch:
    """Draws restricted to graphs with exactly ``m`` edges (swap proposals)."""
    N = n_dyads(n)
    if not 0 <= m <= N:
        raise ValueError(f"edge count {m} outside [0, {N}]")
    rng = _rng_for(cfg, key)
    if init is None:
        vals = np.zeros(N, dtype=np.uint8)
        vals[rng.choice(N, size=m, replace=False)] = 1
        g0 = Graph.from_dyads(n, vals)
    else:
        g0 = init
        if g0.edge_count != m:
            raise ValueError("initial graph must have exactly m edges")
    comp = compile_terms(spec, n, data, network)
    chain = _Chain(comp, spec.theta, g0, data, network, spec)
    vals = g0.dyads()
    on_list = np.flatnonzero(vals == 1).astype(np.int64)
    off_list = np.flatnonzero(vals == 0).astype(np.int64)
    burn, thin = cfg.resolve(N)
    total = burn + thin * cfg.n_draws
    draws = np.zeros((cfg.n_draws, comp.p))
    codes = np.zeros(cfg.n_draws, dtype=np.int64)
    rec, accepted, start = 0, 0, 0
    code = np.int64(chain.code)
    c = comp
    while start < total:
        k = min(CHUNK, total - start)
        u = rng.random((3, k))
        log_u = np.log(u[2])
        acc, rec, code = K.run_swaps(
            chain.adj, chain.deg, chain.sp, c.need_sp, chain.stats, chain.theta,
            c.kinds, c.scale, c.weights, c.rpow, on_list, off_list, chain.di, chain.dj,
            u[0], u[1], log_u, start, burn, thin, draws, codes, rec, code, chain.track)
        accepted += acc
        start += k
    return SampleBatch(
        stats=draws,
        acceptance_rate=accepted / total if total else 0.0,
        ess=ess_per_stat(draws),
        last=Graph._trusted(chain.adj.copy()),
        codes=codes if chain.track else None,
    )


@dataclass
class ExactDistribution:
    """Full enumeration of an ERGM on at most 5 vertices."""

    stats: np.ndarray
    log_weights: np.ndarray
    kappa: float
    probs: np.ndarray
    mean: np.ndarray
    cov: np.ndarray


def all_graph_stats(spec, n: int, data: NodeData | None = None, network=None) -> np.ndarray:
    """Statistic vectors of all 2^N graphs, row ``c`` for the graph with dyad bits ``c``."""
    if n > MAX_EXACT_N:
        raise ValueError(f"exact enumeration refused for n={n} > {MAX_EXACT_N}")
    N = n_dyads(n)
    rows = []
    for bits in itertools.product((0, 1), repeat=N):
        vals = np.array(bits[::-1], dtype=np.uint8)
        rows.append(stat_vector(spec, Graph.from_dyads(n, vals), data, network))
    return np.array(rows).reshape(1 << N, -1)


def exact_from_stats(stats: np.ndarray, theta) -> ExactDistribution:
    logw = stats @ np.asarray(theta, dtype=float)
    kappa = float(logsumexp(logw))
    probs = np.exp(logw - kappa)
    mean = probs @ stats
    centred = stats - mean
    cov = (centred * probs[:, None]).T @ centred
    return ExactDistribution(stats, logw, kappa, probs, mean, cov)


def enumerate_exact(spec: ModelSpec, n: int, data: NodeData | None = None,
                    network=None) -> ExactDistribution:
    """Exact mean, covariance and normalising constant by summing all graphs."""
    return exact_from_stats(all_graph_stats(spec, n, data, network), spec.theta)


def interior_point(points: np.ndarray, target, margin: float = 1e-9) -> bool:
    """Whether ``target`` is in the relative interior of the hull of ``points``.

    Solves max t subject to target = sum(l_k points_k), sum(l) = 1, l_k >= t.
    """
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    k = pts.shape[0]
    c = np.zeros(k + 1)
    c[-1] = -1.0
    a_eq = np.zeros((pts.shape[1] + 1, k + 1))
    a_eq[:-1, :k] = pts.T
    a_eq[-1, :k] = 1.0
    b_eq = np.append(np.asarray(target, dtype=float), 1.0)
    a_ub = np.hstack([-np.eye(k), np.ones((k, 1))])
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(k), A_eq=a_eq, b_eq=b_eq,
                  bounds=[(0, None)] * k + [(None, 1.0)], method="highs")
    return bool(res.status == 0 and -res.fun > margin)


def exact_mle(spec: ModelSpec, g: Graph, data: NodeData | None = None, network=None,
              *, tol: float = 1e-10, max_iter: int = 200, init=None) -> np.ndarray:
    """Exact maximum likelihood by Newton iterations on the enumerated log-normaliser.

    Raises ``ArithmeticError`` when the iterations do not settle, which
    happens when the observed statistics sit on the boundary of the
    convex hull (no finite MLE).
    """
    stats = all_graph_stats(spec, g.n, data, network)
    target = stat_vector(spec, g, data, network)
    if not interior_point(stats, target):
        raise ArithmeticError("observed statistics lie on the boundary of the convex hull")
    theta = np.zeros(len(spec)) if init is None else np.array(init, dtype=float)
    for _ in range(max_iter):
        ex = exact_from_stats(stats, theta)
        grad = target - ex.mean
        if np.linalg.norm(grad) < tol:
            return theta
        step = np.linalg.solve(ex.cov, grad)
        ll0 = theta @ target - ex.kappa
        t = 1.0
        while t > 1e-8:
            cand = theta + t * step
            if cand @ target - exact_from_stats(stats, cand).kappa >= ll0:
                break
            t *= 0.5
        theta = theta + t * step
        if np.max(np.abs(theta)) > 50:
            break
    raise ArithmeticError("exact MLE did not converge (observed statistics on the hull boundary?)")

