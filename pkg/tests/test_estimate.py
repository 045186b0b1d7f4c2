import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize
from scipy.special import expit, logit

from ergmiss.estimate import (Diagnostics, Failure, FitOptions, classify_failure, mcmcmle,
                              mcmcmle_mar, mple)
from ergmiss.graph import Graph, NodeData, apply_mask
from ergmiss.sampler import SamplerConfig, exact_mle, sample_free
from ergmiss.stats import ModelSpec, change_matrix, edgecov, edges, gwesp, nodematch

from conftest import random_graph


def cfg(n, draws=2000, seed=0):
    N = n * (n - 1) // 2
    return SamplerConfig(burn_in=50 * N, thin=N, n_draws=draws, seed=seed)


# ---------------------------------------------------------------- MPLE

def test_mple_density_third():
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    r = mple(ModelSpec([edges()]), g)
    assert r.converged and r.failure is None
    assert r.theta_hat[0] == pytest.approx(logit(1 / 3), abs=1e-8)


def test_mple_separation():
    r = mple(ModelSpec([edges()]), Graph.empty(6))
    assert not r.converged and r.failure is Failure.NON_FINITE_MLE
    assert np.all(np.isnan(r.theta_hat))


def test_mple_collinear_design():
    g = random_graph(10, 0.3, 1)
    r = mple(ModelSpec([edges(), edgecov(g)]), g)
    assert r.failure is Failure.EXCESSIVE_CORRELATION
    r = mple(ModelSpec([edges(), edgecov(Graph.complete(10))]), g)
    assert r.failure is Failure.EXCESSIVE_CORRELATION


def test_mple_matches_generic_optimiser():
    g = random_graph(12, 0.3, 5)
    spec = ModelSpec([edges(), gwesp()])
    X = change_matrix(spec, g)
    y = g.dyads().astype(float)

    def nll(t):
        eta = X @ t
        return -(y @ eta - np.logaddexp(0, eta).sum())

    ref = minimize(nll, np.zeros(2), method="BFGS", options={"gtol": 1e-10}).x
    r = mple(spec, g)
    assert np.allclose(r.theta_hat, ref, atol=1e-5)
    assert np.allclose(r.se ** 2, np.diag(np.linalg.inv(r.info_matrix)))


# ---------------------------------------------------------------- failure taxonomy

def test_classify_examples():
    assert classify_failure({"min_info_diag": -0.3}) is Failure.NON_PD_INFO
    assert classify_failure({"min_ess": 40, "ess_target": 200}) is Failure.ESS_NOT_REACHED
    assert classify_failure({"cov_condition": 1e10}) is Failure.EXCESSIVE_CORRELATION
    assert classify_failure({"moment_converged": False}) is Failure.ESS_NOT_REACHED
    assert classify_failure({"min_ess": 500, "cov_condition": 10.0, "min_info_diag": 1.0}) is None
    ok = Diagnostics(moment_converged=True, min_ess=150, cov_condition=5.0, min_info_diag=1.0,
                     min_info_eig=0.5, max_info_eig=2.0)
    assert classify_failure(ok) is None
    # unset diagnostics (NaN) never pass as healthy
    assert classify_failure(Diagnostics(moment_converged=True, min_ess=150)) is not None


def test_classify_roundoff_eigenvalue_is_not_indefinite():
    d = {"min_info_diag": 1.0, "min_info_eig": -1e-12, "max_info_eig": 50.0,
         "cov_condition": 1e17}
    assert classify_failure(d) is Failure.EXCESSIVE_CORRELATION
    d["min_info_eig"] = -0.01
    assert classify_failure(d) is Failure.NON_PD_INFO


@given(st.booleans(), st.booleans(), st.booleans())
def test_classify_precedence(bad_c, bad_b, bad_a):
    d = {"min_info_diag": -1.0 if bad_c else 1.0,
         "cov_condition": 1e9 if bad_b else 10.0,
         "min_ess": 10.0 if bad_a else 1e4, "ess_target": 100.0}
    want = (Failure.NON_PD_INFO if bad_c else Failure.EXCESSIVE_CORRELATION if bad_b
            else Failure.ESS_NOT_REACHED if bad_a else None)
    assert classify_failure(d) is want


# ---------------------------------------------------------------- MCMC MLE

def test_mcmcmle_edges_only_closed_form():
    g = random_graph(10, 0.2, 0)
    g = Graph.from_dyads(10, (np.arange(45) % 5 == 0).astype(np.uint8))  # 9 of 45
    r = mcmcmle(ModelSpec([edges()]), g, cfg(10))
    assert r.converged
    assert r.theta_hat[0] == pytest.approx(logit(0.2), abs=0.05)
    assert np.allclose(r.se ** 2, np.diag(np.linalg.inv(r.info_matrix)))
    assert r.as_dict()["failure"] is None


def test_mcmcmle_two_terms_matches_exact():
    spec = ModelSpec([edges(), gwesp()])
    g = Graph.from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)])
    truth = exact_mle(spec, g)
    r = mcmcmle(spec, g, SamplerConfig(100, 6, 100_000, seed=3))
    assert r.converged
    assert np.max(np.abs(r.theta_hat - truth)) < 0.05


def test_mcmcmle_mar_edges_only_uses_observed_dyads():
    x = random_graph(12, 0.3, 2)
    rng = np.random.default_rng(0)
    d = Graph.from_dyads(12, (rng.random(66) < 0.3).astype(np.uint8))
    p = apply_mask(x, d)
    r = mcmcmle_mar(ModelSpec([edges()]), p, cfg(12))
    want = logit(p.observed_edge_count / p.observed_count)
    assert r.converged
    assert abs(r.theta_hat[0] - want) < max(3 * r.mc_se[0], 0.05)


def test_mcmcmle_mar_all_missing_is_flat():
    x = random_graph(8, 0.3, 2)
    r = mcmcmle_mar(ModelSpec([edges()]), apply_mask(x, Graph.complete(8)), cfg(8))
    assert r.failure is Failure.NON_PD_INFO and not r.converged


def test_mcmcmle_mar_mask_placement_invariance():
    # edges + nodematch: masks keeping the same observed (change stat, state) multiset
    data = NodeData(8, categorical={"c": ["a"] * 4 + ["b"] * 4})
    spec = ModelSpec([edges(), nodematch("c")])
    x = Graph.from_edges(8, [(0, 1), (1, 2), (4, 5), (5, 6), (0, 4), (2, 7), (3, 6)])
    # swap which within-block non-edge is hidden: (0,3) vs (4,7), both within, both absent
    d1 = Graph.from_edges(8, [(0, 3), (1, 5)])
    d2 = Graph.from_edges(8, [(4, 7), (1, 5)])
    a = mcmcmle_mar(spec, apply_mask(x, d1), cfg(8, 4000, 1), data)
    b = mcmcmle_mar(spec, apply_mask(x, d2), cfg(8, 4000, 1), data)
    assert a.converged and b.converged
    tol = 3 * np.sqrt(a.mc_se ** 2 + b.mc_se ** 2) + 0.02
    assert np.all(np.abs(a.theta_hat - b.theta_hat) < tol)


@pytest.mark.slow
def test_calibration_at_zero_theta():
    spec = ModelSpec([edges()])
    hits = 0
    for rep in range(100):
        g = sample_free(spec, 10, SamplerConfig(500, 45, 1, seed=1000 + rep)).last
        r = mcmcmle(spec, g, cfg(10, 1000, rep))
        hits += bool(r.converged and abs(r.theta_hat[0]) < 3 * r.se[0])
    assert hits >= 95
