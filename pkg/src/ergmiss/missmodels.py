"""Generators for the missingness indicator ``D`` and the assumption classifier.

Two families are provided. Dyad-independent models (homogeneous Bernoulli,
covariate logit, beta, latent space, blocks) give each dyad its own
probability ``p_ij``. :class:`ErgmMiss` is an ERGM over ``D`` whose terms may
depend on the true network ``X`` through ``edgecov``/``degreecov`` terms with
``graph="network"``.

Parameter groups follow the structural / covariate / network split of
:attr:`ergmiss.stats.Term.group`; they are named psi, beta and theta here.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from decimal import ROUND_FLOOR, Decimal

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from ._rng import make_rng
from .graph import Graph, MissMask, NodeData, dyad_index, n_dyads
from .sampler import SampleBatch, SamplerConfig, sample_fixed_count
from .stats import ModelSpec, degreecov, dyad_weights, edgecov, edges, gwdegree, gwesp

STUDY_FRACTIONS = (0.10, 0.35, 0.60)


class Assumption(str, enum.Enum):
    HOMOGENEOUS_MCAR = "HomogeneousMCAR"
    HETEROGENEOUS_MCAR = "HeterogeneousMCAR"
    MCAR = "MCAR"
    MAR = "MAR"
    MNAR = "MNAR"

    def __str__(self):
        return self.value

    @property
    def is_mcar(self) -> bool:
        return self in (Assumption.MCAR, Assumption.HOMOGENEOUS_MCAR,
                        Assumption.HETEROGENEOUS_MCAR)

    def refines(self, other: "Assumption") -> bool:
        """True if ``self`` is ``other`` or a special case of it.

        Both MCAR flavours refine MCAR, and MCAR refines MAR.
        """
        if self == other:
            return True
        if other == Assumption.MCAR:
            return self.is_mcar
        if other == Assumption.MAR:
            return self.is_mcar
        return False


def target_count(fraction: float, N: int) -> int:
    """round(fraction * N) with ties rounded up, computed in decimal."""
    f = float(fraction)
    if not 0.0 <= f <= 1.0 or math.isnan(f):
        raise ValueError(f"target fraction {fraction!r} outside [0, 1]")
    m = (Decimal(repr(f)) * N + Decimal("0.5")).to_integral_value(rounding=ROUND_FLOOR)
    return int(m)


# ---------------------------------------------------------------- models


@dataclass(frozen=True)
class HomBernoulli:
    p: float = 0.35

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    def probabilities(self, n, rng=None, data=None, intercept_shift=0.0):
        return np.full(n_dyads(n), self.p)


@dataclass(frozen=True)
class CovariateLogit:
    """logit p_ij = intercept + sum_k coef_k w_k(i, j) over dyad-independent terms."""

    intercept: float = 0.0
    terms: tuple = ()
    coefs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "coefs", tuple(float(c) for c in self.coefs))
        if len(self.terms) != len(self.coefs):
            raise ValueError("one coefficient per covariate term")
        for t in self.terms:
            if t.group == "structural" and t.kind != "edges":
                raise ValueError(f"{t.name} is not a dyadic covariate")

    def spec(self) -> ModelSpec:
        return ModelSpec(self.terms, self.coefs)

    def linear_predictor(self, n, data=None, network=None) -> np.ndarray:
        r, c = dyad_index(n)
        eta = np.full(r.shape[0], float(self.intercept))
        for t, b in zip(self.terms, self.coefs):
            if b != 0.0:
                eta += b * dyad_weights(t, n, data, network)[r, c]
        return eta

    def probabilities(self, n, rng=None, data=None, intercept_shift=0.0, network=None):
        return expit(self.linear_predictor(n, data, network) + intercept_shift)


@dataclass(frozen=True)
class BetaModel:
    """p_ij = logistic(beta_i + beta_j). ``beta=None`` draws N(0, sigma) per node."""

    beta: tuple | None = None
    sigma: float = 1.0

    def __post_init__(self):
        if self.beta is not None:
            b = tuple(float(v) for v in self.beta)
            if not all(math.isfinite(v) for v in b):
                raise ValueError("beta values must be finite")
            object.__setattr__(self, "beta", b)
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def node_effects(self, n, rng) -> np.ndarray:
        if self.beta is not None:
            if len(self.beta) != n:
                raise ValueError(f"{len(self.beta)} beta values for {n} nodes")
            return np.asarray(self.beta)
        return rng.normal(0.0, self.sigma, size=n)

    def probabilities(self, n, rng=None, data=None, intercept_shift=0.0):
        b = self.node_effects(n, rng)
        r, c = dyad_index(n)
        return expit(b[r] + b[c] + intercept_shift)


@dataclass(frozen=True)
class LatentSpace:
    """p_ij = logistic(alpha + gamma * |u_i - u_j|) with positions u in R^dim.

    ``positions=None`` draws i.i.d. standard normal coordinates. With
    ``gamma > 0`` distant pairs are more likely to be missing.
    """

    dim: int = 2
    positions: np.ndarray | None = field(default=None, compare=False)
    alpha: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("latent dimension must be >= 1")
        if self.positions is not None:
            u = np.array(self.positions, dtype=float)
            if u.ndim != 2 or u.shape[1] != self.dim:
                raise ValueError(f"positions must have shape (n, {self.dim})")
            u.flags.writeable = False
            object.__setattr__(self, "positions", u)

    def coordinates(self, n, rng) -> np.ndarray:
        if self.positions is not None:
            if self.positions.shape[0] != n:
                raise ValueError(f"{self.positions.shape[0]} positions for {n} nodes")
            return self.positions
        return rng.standard_normal((n, self.dim))

    def distances(self, n, rng) -> np.ndarray:
        u = self.coordinates(n, rng)
        r, c = dyad_index(n)
        return np.linalg.norm(u[r] - u[c], axis=1)

    def probabilities(self, n, rng=None, data=None, intercept_shift=0.0):
        return expit(self.alpha + intercept_shift + self.gamma * self.distances(n, rng))


@dataclass(frozen=True)
class BlockStructure:
    """Block-constant probabilities. ``partition=None`` splits nodes into two halves."""

    partition: tuple | None = None
    p_within: float = 0.1
    p_between: float = 0.4

    def __post_init__(self):
        for v in (self.p_within, self.p_between):
            if not 0.0 <= v <= 1.0:
                raise ValueError("block probabilities must lie in [0, 1]")
        if self.partition is not None:
            object.__setattr__(self, "partition", tuple(int(b) for b in self.partition))

    def blocks(self, n) -> np.ndarray:
        if self.partition is None:
            return (np.arange(n) >= (n + 1) // 2).astype(np.int64)
        if len(self.partition) != n:
            raise ValueError(f"partition covers {len(self.partition)} of {n} nodes")
        return np.asarray(self.partition)

    def probabilities(self, n, rng=None, data=None, intercept_shift=0.0):
        b = self.blocks(n)
        r, c = dyad_index(n)
        return np.where(b[r] == b[c], self.p_within, self.p_between)


@dataclass(frozen=True)
class ErgmMiss:
    """ERGM for ``D``; network-group terms read the true network ``X``."""

    spec: ModelSpec

    @property
    def needs_network(self) -> bool:
        return any(t.group == "network" and v != 0.0
                   for t, v in zip(self.spec.terms, self.spec.theta))


INDEPENDENT = (HomBernoulli, CovariateLogit, BetaModel, LatentSpace, BlockStructure)
MissModel = HomBernoulli | CovariateLogit | BetaModel | LatentSpace | BlockStructure | ErgmMiss


# ---------------------------------------------------------------- presets


def ergm_mcar_t3() -> ErgmMiss:
    return ErgmMiss(ModelSpec([edges(), gwdegree(), gwesp()], [0.0, 2.0, 2.0]))


def ergm_mnar_t3() -> ErgmMiss:
    terms = [edges(), gwdegree(), gwesp(), edgecov(), degreecov()]
    return ErgmMiss(ModelSpec(terms, [0.0, 0.4, 0.5, 0.8, 0.2]))


def ergm_sweep(theta1: float = 0.0, theta2: float = 0.0) -> ErgmMiss:
    """Edges, GWDegree, GWESP at 0 with entrainment and degree covariate set."""
    terms = [edges(), gwdegree(), gwesp(), edgecov(), degreecov()]
    return ErgmMiss(ModelSpec(terms, [0.0, 0.0, 0.0, theta1, theta2]))


PRESETS = {
    "hbern": HomBernoulli,
    "beta": BetaModel,
    "latent": LatentSpace,
    "block": BlockStructure,
    "ergm_mcar_t3": ergm_mcar_t3,
    "ergm_mnar_t3": ergm_mnar_t3,
}


def preset(name: str, **params):
    """Missingness model by config name, with optional parameter overrides."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown missingness preset {name!r}; "
                         f"choose from {sorted(PRESETS)}") from None
    if params and name.startswith("ergm_"):
        raise ValueError(f"preset {name!r} takes no parameters")
    return factory(**params)


# ---------------------------------------------------------------- generation


def _weighted_subset(rng, weights: np.ndarray, m: int) -> np.ndarray:
    """m distinct indices, drawn successively with probability proportional to weight.

    All-zero weights give a uniform draw; if fewer than ``m`` weights are
    positive the positive ones are all taken and the rest filled uniformly.
    """
    N = weights.shape[0]
    pos = np.flatnonzero(weights > 0.0)
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    if pos.shape[0] == 0:
        return rng.choice(N, size=m, replace=False)
    if pos.shape[0] <= m:
        zero = np.flatnonzero(weights <= 0.0)
        extra = rng.choice(zero, size=m - pos.shape[0], replace=False)
        return np.concatenate([pos, extra])
    p = weights / weights.sum()
    return rng.choice(N, size=m, replace=False, p=p)


def dyad_probabilities(model, n: int, seed: int = 0, data: NodeData | None = None,
                       network: Graph | None = None) -> np.ndarray:
    """Per-dyad missingness probabilities (canonical dyad order) for one seed."""
    rng = make_rng(seed, 10, 0)
    if isinstance(model, CovariateLogit):
        return model.probabilities(n, rng, data, network=network)
    return model.probabilities(n, rng, data)


def gen_independent(model, n: int, seed: int, target_fraction: float | None = None,
                    data: NodeData | None = None, network: Graph | None = None) -> MissMask:
    """Draw ``D`` from a dyad-independent missingness model.

    Without ``target_fraction`` every ``d_ij`` is an independent Bernoulli
    draw. With it, exactly ``round(f N)`` dyads are missing, picked by
    weighted sampling without replacement with weights ``p_ij``; models
    with an intercept (latent space, covariate logit) first have it shifted
    so the expected fraction matches ``f``.
    """
    if not isinstance(model, INDEPENDENT):
        raise TypeError(f"{type(model).__name__} is not a dyad-independent model")
    N = n_dyads(n)
    m = None if target_fraction is None else target_count(target_fraction, N)

    # node effects / positions come from their own stream so calibration
    # sees the same realisation as the final draw
    def effects_rng():
        return make_rng(seed, 10, 0)

    if isinstance(model, CovariateLogit):
        def probs(shift):
            return model.probabilities(n, None, data, shift, network=network)
    else:
        def probs(shift):
            return model.probabilities(n, effects_rng(), data, shift)

    rng = make_rng(seed, 10, 1)
    if m is None:
        p = probs(0.0)
        return MissMask.from_dyads(n, (rng.random(N) < p).astype(np.uint8))
    shift = 0.0
    if isinstance(model, (LatentSpace, CovariateLogit)):
        shift = _calibrate_shift(probs, target_fraction)
    w = probs(shift)
    vals = np.zeros(N, dtype=np.uint8)
    vals[_weighted_subset(rng, w, m)] = 1
    return MissMask.from_dyads(n, vals)


def _calibrate_shift(probs, fraction: float) -> float:
    if fraction <= 0.0 or fraction >= 1.0:
        return 0.0

    def gap(shift):
        return float(np.mean(probs(shift))) - fraction

    lo, hi = -60.0, 60.0
    if gap(lo) >= 0.0 or gap(hi) <= 0.0:
        return 0.0
    return brentq(gap, lo, hi, xtol=1e-12)


def gen_ergm_miss(model: ErgmMiss, x: Graph | None, n: int, fraction: float,
                  cfg: SamplerConfig, *, return_batch: bool = False):
    """One draw of ``D`` from an ERGM restricted to exactly round(f N) missing dyads.

    Terms with zero parameters are dropped, and so is ``edges`` since its
    statistic is constant on the slice. With nothing left the draw is
    uniform over the slice and is made directly.
    """
    if x is not None and x.n != n:
        raise ValueError(f"conditioning network has {x.n} vertices, expected {n}")
    if model.needs_network and x is None:
        raise ValueError("theta terms need the conditioning network x")
    N = n_dyads(n)
    m = target_count(fraction, N)
    keep = [k for k, (t, v) in enumerate(zip(model.spec.terms, model.spec.theta))
            if v != 0.0 and t.kind != "edges"]
    if not keep:
        rng = make_rng(cfg.seed, 11)
        vals = np.zeros(N, dtype=np.uint8)
        vals[rng.choice(N, size=m, replace=False)] = 1
        mask = MissMask.from_dyads(n, vals)
        if return_batch:
            batch = SampleBatch(np.zeros((1, 0)), 1.0, np.ones(0), mask, None)
            return mask, batch
        return mask
    spec = ModelSpec([model.spec.terms[k] for k in keep], model.spec.theta[keep])
    one = SamplerConfig(cfg.burn_in, cfg.thin, 1, cfg.seed, "swap")
    batch = sample_fixed_count(spec, n, m, one, network=x, key=(11,))
    mask = MissMask.from_graph(batch.last)
    return (mask, batch) if return_batch else mask


def generate(model, n: int, seed: int, fraction: float | None, *, x: Graph | None = None,
             cfg: SamplerConfig | None = None, data: NodeData | None = None) -> MissMask:
    """Dispatch to :func:`gen_independent` or :func:`gen_ergm_miss`."""
    if isinstance(model, ErgmMiss):
        if fraction is None:
            raise ValueError("ERGM missingness needs a fixed fraction")
        c = (cfg or SamplerConfig()).with_seed(seed)
        return gen_ergm_miss(model, x, n, fraction, c)
    return gen_independent(model, n, seed, fraction, data=data, network=x)


# ---------------------------------------------------------------- classifier


def _nonzero(values) -> bool:
    return any(v != 0.0 for v in values)


def _groups(spec: ModelSpec):
    psi, beta, theta = [], [], []
    for t, v in zip(spec.terms, spec.theta):
        if t.group == "network":
            theta.append(v)
        elif t.group == "covariate":
            beta.append(v)
        elif t.kind != "edges":
            # the edges parameter only sets the overall rate and leaves
            # every dyad exchangeable, so it does not make D heterogeneous
            psi.append(v)
    return psi, beta, theta


def _classify_groups(psi, beta, theta) -> Assumption:
    if _nonzero(theta):
        return Assumption.MNAR
    if _nonzero(beta):
        return Assumption.MAR
    if _nonzero(psi):
        return Assumption.HETEROGENEOUS_MCAR
    return Assumption.HOMOGENEOUS_MCAR


def classify_assumption(model) -> Assumption:
    """Most specific missingness assumption implied by the nonzero parameters.

    theta != 0 gives MNAR; theta = 0 with beta != 0 gives MAR; otherwise the
    model is MCAR, heterogeneous if any endogenous or node-level effect is
    active and homogeneous if not.
    """
    if isinstance(model, ErgmMiss):
        return _classify_groups(*_groups(model.spec))
    if isinstance(model, HomBernoulli):
        return Assumption.HOMOGENEOUS_MCAR
    if isinstance(model, CovariateLogit):
        return _classify_groups(*_groups(model.spec()))
    if isinstance(model, BetaModel):
        if model.beta is None:
            het = model.sigma > 0.0
        else:
            het = len(set(model.beta)) > 1
        return Assumption.HETEROGENEOUS_MCAR if het else Assumption.HOMOGENEOUS_MCAR
    if isinstance(model, LatentSpace):
        return Assumption.HETEROGENEOUS_MCAR if model.gamma != 0.0 \
            else Assumption.HOMOGENEOUS_MCAR
    if isinstance(model, BlockStructure):
        het = model.p_within != model.p_between and (
            model.partition is None or len(set(model.partition)) > 1)
        return Assumption.HETEROGENEOUS_MCAR if het else Assumption.HOMOGENEOUS_MCAR
    raise TypeError(f"not a missingness model: {type(model).__name__}")


def assumption_rows() -> list[tuple[str, Assumption]]:
    """The five parameter patterns of the assumption table and their labels."""
    return [
        ("theta = 0", Assumption.MCAR),
        ("theta = 0, beta = 0", Assumption.HETEROGENEOUS_MCAR),
        ("theta = 0, beta = 0, psi = 0", Assumption.HOMOGENEOUS_MCAR),
        ("theta = 0, beta != 0", Assumption.MAR),
        ("theta != 0", Assumption.MNAR),
    ]
