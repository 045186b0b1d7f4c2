"""ERGM estimation from complete and partially observed networks.

Complete data are handled as the special case of a partial graph with no NA
dyads, so :func:`mcmcmle` and :func:`mcmcmle_mar` share one solver. The
solver targets the moment equation

    E_eta[s(Y)] = E_eta[s(Y) | X_obs]

by alternating an unconstrained chain and a chain over the NA dyads. The
negative Hessian of the face-value log-likelihood is Cov[s] - Cov[s | X_obs];
when it is not positive definite the run is flagged, as in failure (c).
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.special import expit, logit

from .graph import Graph, NodeData, PartialGraph, apply_mask, zero_impute
from .sampler import SamplerConfig, sample_conditional, sample_free
from .stats import ModelSpec, change_matrix

log = logging.getLogger(__name__)

EIG_FLOOR = 1e-8
RELATIVE_EIG_TOL = 1e-9


class Failure(str, enum.Enum):
    ESS_NOT_REACHED = "EssNotReached"
    EXCESSIVE_CORRELATION = "ExcessiveCorrelation"
    NON_PD_INFO = "NonPositiveDefiniteInfo"
    NON_FINITE_MLE = "NonFiniteMLE"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class FitOptions:
    tol: float = 0.1
    max_iter: int = 60
    ess_target: float = 100.0
    cond_max: float = 1e8
    damping: float = 0.5
    max_halvings: int = 10
    min_weight_ess: float = 0.05


@dataclass
class Diagnostics:
    moment_converged: bool = False
    iterations: int = 0
    t_ratios: np.ndarray | None = None
    min_ess: float = float("nan")
    ess_target: float = 100.0
    cov_condition: float = float("nan")
    min_info_diag: float = float("nan")
    min_info_eig: float = float("nan")
    max_info_eig: float = float("nan")
    cond_max: float = 1e8
    acceptance: float = float("nan")
    note: str = ""


@dataclass
class EstimationResult:
    names: list[str]
    theta_hat: np.ndarray
    se: np.ndarray
    info_matrix: np.ndarray
    n_iterations: int
    converged: bool
    failure: Failure | None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    mc_se: np.ndarray | None = None
    method: str = ""

    @property
    def t_ratios(self) -> np.ndarray | None:
        return self.diagnostics.t_ratios

    def as_dict(self) -> dict[str, Any]:
        d = self.diagnostics
        return {
            "method": self.method,
            "names": list(self.names),
            "theta_hat": _floats(self.theta_hat),
            "se": _floats(self.se),
            "mc_se": None if self.mc_se is None else _floats(self.mc_se),
            "converged": bool(self.converged),
            "failure": None if self.failure is None else self.failure.value,
            "n_iterations": int(self.n_iterations),
            "diagnostics": {
                "moment_converged": bool(d.moment_converged),
                "t_ratios": None if d.t_ratios is None else _floats(d.t_ratios),
                "min_ess": _f(d.min_ess),
                "cov_condition": _f(d.cov_condition),
                "min_info_diag": _f(d.min_info_diag),
                "min_info_eig": _f(d.min_info_eig),
                "max_info_eig": _f(d.max_info_eig),
                "note": d.note,
            },
        }


def _f(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _floats(a):
    return [_f(v) for v in np.asarray(a, dtype=float).ravel()]


def _get(diag, name, default=None):
    if isinstance(diag, Mapping):
        return diag.get(name, default)
    return getattr(diag, name, default)


def classify_failure(diag) -> Failure | None:
    """Failure label from diagnostics; precedence (c) > (b) > (a).

    Accepts a :class:`Diagnostics` or a mapping with the same field names.
    Missing fields are treated as unproblematic.
    """
    min_diag = _get(diag, "min_info_diag")
    min_eig = _get(diag, "min_info_eig")
    if min_diag is not None and (not np.isfinite(min_diag) or min_diag <= 0.0):
        return Failure.NON_PD_INFO
    if min_eig is not None:
        # an exactly singular matrix has eigenvalues of order +-eps * scale;
        # those are collinearity, reported through the condition number
        scale = abs(_get(diag, "max_info_eig", 0.0) or 0.0)
        if not np.isfinite(min_eig) or min_eig < -RELATIVE_EIG_TOL * max(scale, 1.0):
            return Failure.NON_PD_INFO
    cond = _get(diag, "cov_condition")
    if cond is not None and (np.isnan(cond) or cond > _get(diag, "cond_max", 1e8)):
        return Failure.EXCESSIVE_CORRELATION
    if _get(diag, "moment_converged", True) is False:
        return Failure.ESS_NOT_REACHED
    ess = _get(diag, "min_ess")
    target = _get(diag, "ess_target", 100.0)
    if ess is not None and np.isfinite(ess) and ess < target:
        return Failure.ESS_NOT_REACHED
    return None


def _failed(names, method, failure, note, info=None, iterations=0) -> EstimationResult:
    p = len(names)
    return EstimationResult(
        names=list(names),
        theta_hat=np.full(p, np.nan),
        se=np.full(p, np.nan),
        info_matrix=np.full((p, p), np.nan) if info is None else info,
        n_iterations=iterations,
        converged=False,
        failure=failure,
        diagnostics=Diagnostics(note=note),
        method=method,
    )


def _cov_condition(c: np.ndarray) -> float:
    if not np.all(np.isfinite(c)):
        return float("inf")
    s = np.linalg.svd(np.atleast_2d(c), compute_uv=False)
    if s[-1] <= 0.0 or s[-1] < 1e-300:
        return float("inf")
    return float(s[0] / s[-1])


def _se_from_info(info: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """(se, inverse, positive definite) with an eigenvalue floor for non-PD input."""
    sym = 0.5 * (info + info.T)
    w, v = np.linalg.eigh(sym)
    pd = bool(w.min() > 0.0)
    w = np.maximum(w, EIG_FLOOR)
    inv = (v / w) @ v.T
    return np.sqrt(np.diag(inv)), inv, pd


# ---------------------------------------------------------------- MPLE


def _logistic_newton(X, y, tol, max_iter):
    theta = np.zeros(X.shape[1])
    for it in range(max_iter):
        eta = X @ theta
        if np.max(np.abs(eta)) > 30.0:
            return theta, it, False
        mu = expit(eta)
        grad = X.T @ (y - mu)
        if np.linalg.norm(grad) < tol:
            return theta, it, True
        H = (X * (mu * (1 - mu))[:, None]).T @ X
        step = np.linalg.lstsq(H, grad, rcond=None)[0]
        ll0 = _loglik(X, y, theta)
        t = 1.0
        while t > 1e-10 and _loglik(X, y, theta + t * step) < ll0 - 1e-12:
            t *= 0.5
        theta = theta + t * step
    return theta, max_iter, False


def _loglik(X, y, theta):
    eta = X @ theta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def mple(spec: ModelSpec, g: Graph, data: NodeData | None = None, *, network=None,
         tol: float = 1e-8, max_iter: int = 200, cond_max: float = 1e8) -> EstimationResult:
    """Maximum pseudo-likelihood: logistic regression of dyad states on change statistics."""
    names = [t.name for t in spec.terms]
    X = change_matrix(spec, g, data, network)
    y = g.dyads().astype(float)
    p = X.shape[1]
    if y.min() == y.max():
        return _failed(names, "mple", Failure.NON_FINITE_MLE, "all dyads share one state")
    if np.linalg.matrix_rank(X) < p:
        return _failed(names, "mple", Failure.EXCESSIVE_CORRELATION, "rank-deficient design")
    resid = y - X @ np.linalg.lstsq(X, y, rcond=None)[0]
    if np.max(np.abs(resid)) < 1e-9:
        return _failed(names, "mple", Failure.EXCESSIVE_CORRELATION,
                       "response is a linear combination of model terms")
    theta, iters, ok = _logistic_newton(X, y, tol, max_iter)
    if not ok:
        return _failed(names, "mple", Failure.NON_FINITE_MLE, "separation", iterations=iters)
    mu = expit(X @ theta)
    info = (X * (mu * (1 - mu))[:, None]).T @ X
    se, _, pd = _se_from_info(info)
    cond = _cov_condition(info)
    diag = Diagnostics(moment_converged=True, iterations=iters, min_ess=float("inf"),
                       ess_target=0.0, cov_condition=cond, cond_max=cond_max,
                       min_info_diag=float(np.diag(info).min()),
                       min_info_eig=float(np.linalg.eigvalsh(info).min()),
                       max_info_eig=float(np.linalg.eigvalsh(info).max()))
    failure = classify_failure(diag)
    return EstimationResult(names, theta, se, info, iters, failure is None, failure, diag,
                            method="mple")


# ---------------------------------------------------------------- MCMC MLE


def _weights(stats: np.ndarray, delta: np.ndarray) -> np.ndarray:
    lw = stats @ delta
    lw -= lw.max()
    w = np.exp(lw)
    return w / w.sum()


def _wmoments(stats, w):
    m = w @ stats
    c = stats - m
    return m, (c * w[:, None]).T @ c


def _discrepancy(fs, cs, delta, cf_pinv):
    wf = _weights(fs, delta)
    diff = _weights(cs, delta) @ cs - wf @ fs
    return float(diff @ cf_pinv @ diff), 1.0 / float(np.sum(wf * wf))


def _is_step(fs, cs, Cf, opts: FitOptions, max_newton: int = 25) -> np.ndarray:
    """Maximise the importance-sampled face-value log-likelihood ratio.

    Newton iterations on the sample drawn at the current parameters; a step
    is halved while it raises the estimated moment discrepancy or drives the
    importance weights' effective size below ``min_weight_ess``.
    """
    p = fs.shape[1]
    n = fs.shape[0]
    cf_pinv = np.linalg.pinv(Cf)
    delta = np.zeros(p)
    d_cur, _ = _discrepancy(fs, cs, delta, cf_pinv)
    for _ in range(max_newton):
        wf, wc = _weights(fs, delta), _weights(cs, delta)
        mf, vf = _wmoments(fs, wf)
        mc, vc = _wmoments(cs, wc)
        grad = mc - mf
        if d_cur < 1e-20:
            break
        info = vf - vc
        try:
            np.linalg.cholesky(0.5 * (info + info.T))
            metric = info
        except np.linalg.LinAlgError:
            metric = vf
        step = np.linalg.lstsq(metric, grad, rcond=None)[0]
        for _ in range(opts.max_halvings):
            d_new, w_ess = _discrepancy(fs, cs, delta + step, cf_pinv)
            if d_new <= d_cur and w_ess >= opts.min_weight_ess * n:
                break
            step = step * opts.damping
        else:
            break
        delta = delta + step
        if d_cur - d_new < 1e-12 * max(d_cur, 1.0):
            d_cur = d_new
            break
        d_cur = d_new
    return delta


def _start_theta(spec, p_graph, data, network):
    z = zero_impute(p_graph)
    try:
        m0 = mple(spec, z, data, network=network)
    except (ValueError, np.linalg.LinAlgError):
        m0 = None
    if m0 is not None and m0.failure is None and np.all(np.isfinite(m0.theta_hat)):
        return m0.theta_hat.copy(), "mple"
    theta = np.zeros(len(spec))
    obs = p_graph.observed_count
    dens = p_graph.observed_edge_count / obs if obs else 0.5
    for k, t in enumerate(spec.terms):
        if t.kind == "edges":
            theta[k] = float(logit(np.clip(dens, 1e-3, 1 - 1e-3)))
    return theta, "density"


def _fit(spec: ModelSpec, p_graph: PartialGraph, cfg: SamplerConfig, data, network,
         opts: FitOptions, init, method: str) -> EstimationResult:
    names = [t.name for t in spec.terms]
    n = p_graph.n
    if p_graph.observed_count == 0:
        return _failed(names, method, Failure.NON_PD_INFO,
                       "no observed dyads: face-value likelihood is flat")
    if init is None:
        theta, how = _start_theta(spec, p_graph, data, network)
    else:
        theta, how = np.array(init, dtype=float), "user"
    free_init = zero_impute(p_graph)
    cond_init = None
    diag = Diagnostics(ess_target=opts.ess_target, cond_max=opts.cond_max,
                       note=f"start={how}")
    fs = cs = None
    free = cond = None
    it = 0
    for it in range(1, opts.max_iter + 1):
        if not np.all(np.isfinite(theta)) or np.max(np.abs(theta)) > 1e3:
            diag.note += "; parameters diverged"
            break
        spec_t = spec.with_theta(theta)
        free = sample_free(spec_t, n, cfg, data, network=network, init=free_init, key=(it, 0))
        cond = sample_conditional(spec_t, p_graph, cfg, data, network=network,
                                  init=cond_init, key=(it, 1))
        free_init, cond_init = free.last, cond.last
        fs, cs = free.stats, cond.stats
        Cf, Cc = free.cov(), cond.cov()
        sd = np.sqrt(np.clip(np.diag(Cf), 0.0, None))
        diff = np.abs(cs.mean(axis=0) - fs.mean(axis=0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(sd > 0, diff / np.where(sd > 0, sd, 1.0),
                         np.where(diff > 1e-12, np.inf, 0.0))
        diag.t_ratios = t
        step = _is_step(fs, cs, Cf, opts)
        theta = theta + step
        if np.all(t < opts.tol):
            diag.moment_converged = True
            break
    diag.iterations = it
    if free is None:
        out = _failed(names, method, Failure.ESS_NOT_REACHED, diag.note, iterations=it)
        out.diagnostics = diag
        return out
    Cf, Cc = free.cov(), cond.cov()
    info = Cf - Cc
    se, inv, _ = _se_from_info(info)
    ess_f = free.ess
    ess_c = cond.ess if p_graph.na_count > 0 else np.full(len(names), np.inf)
    diag.min_ess = float(min(ess_f.min(), ess_c.min()))
    diag.cov_condition = _cov_condition(Cf)
    diag.min_info_diag = float(np.diag(info).min())
    eig = np.linalg.eigvalsh(0.5 * (info + info.T))
    diag.min_info_eig, diag.max_info_eig = float(eig.min()), float(eig.max())
    diag.acceptance = free.acceptance_rate
    sf = 1.0 / np.sqrt(ess_f)
    sc = np.where(np.isfinite(ess_c), 1.0 / np.sqrt(ess_c), 0.0)
    g_cov = Cf * np.outer(sf, sf) + Cc * np.outer(sc, sc)
    mc_se = np.sqrt(np.clip(np.diag(inv @ g_cov @ inv), 0.0, None))
    failure = classify_failure(diag)
    if failure is not None:
        log.debug("%s failed: %s (%s)", method, failure, diag.note)
    return EstimationResult(names, theta, se, info, it, failure is None, failure, diag,
                            mc_se=mc_se, method=method)


def mcmcmle(spec: ModelSpec, g: Graph, cfg: SamplerConfig, data: NodeData | None = None, *,
            network=None, options: FitOptions | None = None, init=None) -> EstimationResult:
    """Monte-Carlo MLE from a fully observed network."""
    p_graph = apply_mask(g, Graph.empty(g.n))
    return _fit(spec, p_graph, cfg, data, network, options or FitOptions(), init, "mcmcmle")


def mcmcmle_mar(spec: ModelSpec, p: PartialGraph, cfg: SamplerConfig,
                data: NodeData | None = None, *, network=None,
                options: FitOptions | None = None, init=None) -> EstimationResult:
    """Face-value (MAR) Monte-Carlo MLE from a partially observed network."""
    return _fit(spec, p, cfg, data, network, options or FitOptions(), init, "mcmcmle_mar")
