import json
import math
import os
import subprocess
import sys
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit, logit

from ergmiss.graph import NA, Graph, PartialGraph, apply_mask, dyad_index
from ergmiss.sampler import (SamplerConfig, all_graph_stats, effective_sample_size,
                             enumerate_exact, exact_mle, interior_point, sample_conditional,
                             sample_fixed_count, sample_free)
from ergmiss.stats import ModelSpec, altkstar, edges, gwdegree, gwesp, stat_vector

from conftest import bf_gwesp, graph_from_bits

LOG2 = math.log(2.0)


def three_term(theta=(0.0, 0.0, 0.0)):
    return ModelSpec([edges(), altkstar(2.0), gwesp()], theta)


def test_config_validation():
    for bad in (dict(burn_in=-1), dict(thin=0), dict(n_draws=0), dict(proposal="gibbs")):
        with pytest.raises(ValueError):
            SamplerConfig(**bad)
    assert SamplerConfig().resolve(45) == (450_000, 45)
    assert SamplerConfig(burn_in=3, thin=2).resolve(45) == (3, 2)


def test_uniform_at_zero_theta():
    b = sample_free(three_term(), 4, SamplerConfig(100, 6, 20_000, seed=1))
    se = math.sqrt(1.5 / 20_000)
    assert abs(b.mean()[0] - 3.0) < 4 * se
    assert 0.0 <= b.acceptance_rate <= 1.0
    assert np.all(b.ess <= b.n_draws)


def test_edges_only_density():
    spec = ModelSpec([edges()], [logit(0.2)])
    b = sample_free(spec, 10, SamplerConfig(2000, 45, 4000, seed=3))
    se = math.sqrt(0.2 * 0.8 / 45 / 4000)
    assert abs(b.mean()[0] / 45 - 0.2) < 4 * se


def test_strongly_negative_edges_gives_empty():
    b = sample_free(ModelSpec([edges()], [-10.0]), 6, SamplerConfig(200, 15, 200, seed=0))
    assert b.stats.max() <= 1
    assert b.stats.mean() < 0.01


def test_fixed_count_extremes():
    spec = three_term((0.3, -0.2, 0.5))
    b0 = sample_fixed_count(spec, 5, 0, SamplerConfig(50, 1, 50))
    assert np.all(b0.stats[:, 0] == 0) and b0.last.edge_count == 0
    bN = sample_fixed_count(spec, 5, 10, SamplerConfig(50, 1, 50))
    assert np.all(bN.stats[:, 0] == 10) and bN.last == Graph.complete(5)
    with pytest.raises(ValueError):
        sample_fixed_count(spec, 5, 11, SamplerConfig(1, 1, 1))


def test_fixed_count_uniform_slice_gwesp():
    # 120 three-edge graphs on 5 vertices; exact average of GWESP
    gs = [graph_from_bits(5, [int(k in c) for k in range(10)]) for c in combinations(range(10), 3)]
    truth = np.array([bf_gwesp(g, LOG2) for g in gs])
    b = sample_fixed_count(ModelSpec([gwesp()]), 5, 3, SamplerConfig(100, 10, 20_000, seed=4))
    se = truth.std() / math.sqrt(b.ess[0])
    assert abs(b.mean()[0] - truth.mean()) < 4 * se
    assert np.all(b.stats[:, 0] >= 0)


@settings(max_examples=15)
@given(st.integers(4, 7), st.integers(0, 10), st.integers(0, 2**20))
def test_fixed_count_never_leaves_slice(n, m, seed):
    m = min(m, n * (n - 1) // 2)
    spec = ModelSpec([edges(), gwdegree(0.5), gwesp()], [0.0, 1.0, -0.5])
    cfg = SamplerConfig(20, 3, 30, seed=seed, proposal="swap")
    b = sample_fixed_count(spec, n, m, cfg)
    assert np.all(b.stats[:, 0] == m)
    assert b.last.edge_count == m


def test_conditional_no_missing_is_constant():
    x = Graph.from_edges(5, [(0, 1), (2, 3)])
    b = sample_conditional(three_term((1, 1, 1)), apply_mask(x, Graph.empty(5)),
                           SamplerConfig(10, 1, 20))
    assert np.all(b.stats == stat_vector(three_term(), x))
    assert b.last == x


def test_conditional_edges_only_bernoulli():
    x = Graph.from_edges(6, [(0, 1), (1, 2), (3, 4)])
    d = Graph.from_edges(6, [(0, 1), (0, 5), (2, 5), (4, 5)])
    p = apply_mask(x, d)
    spec = ModelSpec([edges()], [logit(0.3)])
    b = sample_conditional(spec, p, SamplerConfig(200, 4, 20_000, seed=2))
    filled = b.stats[:, 0] - p.observed_edge_count
    se = math.sqrt(4 * 0.21 / b.ess[0])
    assert abs(filled.mean() - 1.2) < 4 * se


@settings(max_examples=20)
@given(st.integers(0, 2**20))
def test_conditional_keeps_observed_dyads(seed):
    rng = np.random.default_rng(seed)
    n = 6
    x = graph_from_bits(n, rng.integers(0, 2, 15))
    d = graph_from_bits(n, rng.integers(0, 2, 15))
    p = apply_mask(x, d)
    b = sample_conditional(three_term((-0.5, 0.2, 0.4)), p, SamplerConfig(30, 2, 5, seed=seed))
    obs = p.state != NA
    assert np.array_equal(b.last.adj[obs], p.state[obs].astype(np.uint8))


def test_conditional_rejects_inconsistent_start():
    x = Graph.from_edges(4, [(0, 1)])
    p = apply_mask(x, Graph.from_edges(4, [(2, 3)]))
    with pytest.raises(ValueError):
        sample_conditional(three_term(), p, SamplerConfig(1, 1, 1), init=Graph.empty(4))


def test_exact_examples():
    ex = enumerate_exact(three_term(), 4)
    assert ex.mean[0] == pytest.approx(3.0)
    assert ex.kappa == pytest.approx(6 * LOG2)
    for t in (-1.3, 0.4):
        e3 = enumerate_exact(ModelSpec([edges()], [t]), 3)
        assert e3.mean[0] == pytest.approx(3 * expit(t))
    with pytest.raises(ValueError):
        enumerate_exact(three_term(), 6)


def test_all_graph_stats_row_order():
    stats = all_graph_stats([edges()], 4)
    codes = np.arange(64)
    assert np.array_equal(stats[:, 0], [bin(c).count("1") for c in codes])


def test_detailed_balance_total_variation():
    spec = three_term((-0.4, 0.3, 0.5))
    ex = enumerate_exact(spec, 4)
    b = sample_free(spec, 4, SamplerConfig(1000, 1, 1_000_000, seed=11))
    freq = np.bincount(b.codes, minlength=64) / b.n_draws
    assert 0.5 * np.abs(freq - ex.probs).sum() < 0.02


def test_same_seed_same_draws():
    cfg = SamplerConfig(100, 3, 200, seed=42)
    a = sample_free(three_term((-1, 0.2, 0.3)), 7, cfg)
    b = sample_free(three_term((-1, 0.2, 0.3)), 7, cfg)
    c = sample_free(three_term((-1, 0.2, 0.3)), 7, cfg.with_seed(43))
    assert np.array_equal(a.stats, b.stats)
    assert not np.array_equal(a.stats, c.stats)


def test_interior_point():
    square = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    assert interior_point(square, [0.5, 0.5])
    assert not interior_point(square, [1.0, 0.5])
    assert not interior_point(square, [2.0, 0.5])


def test_exact_mle_boundary_raises():
    with pytest.raises(ArithmeticError):
        exact_mle(ModelSpec([edges()]), Graph.empty(4))
    g = Graph.from_edges(4, [(0, 1), (1, 2)])
    theta = exact_mle(ModelSpec([edges()]), g)
    assert theta[0] == pytest.approx(logit(2 / 6), abs=1e-8)


def test_effective_sample_size():
    rng = np.random.default_rng(0)
    iid = rng.normal(size=4000)
    assert effective_sample_size(iid) > 2500
    ar = np.zeros(4000)
    for t in range(1, 4000):
        ar[t] = 0.95 * ar[t - 1] + rng.normal()
    assert effective_sample_size(ar) < 400
    assert effective_sample_size(np.ones(50)) == 50


_SCRIPT = """
import json, numpy as np
from ergmiss._jit import USE_NUMBA
from ergmiss.sampler import SamplerConfig, sample_free, sample_fixed_count, sample_conditional
from ergmiss.stats import ModelSpec, edges, altkstar, gwesp, gwdegree
from ergmiss.graph import Graph, apply_mask
spec = ModelSpec([edges(), altkstar(2.0), gwdegree(0.5), gwesp()], [-1.0, 0.2, 0.3, 0.4])
cfg = SamplerConfig(300, 5, 300, seed=9)
a = sample_free(spec, 8, cfg)
b = sample_fixed_count(spec, 8, 9, cfg)
x = a.last
d = Graph.from_dyads(8, (np.arange(28) % 4 == 0).astype(np.uint8))
c = sample_conditional(spec, apply_mask(x, d), cfg)
print(json.dumps({"numba": USE_NUMBA, "a": a.stats.tolist(), "b": b.stats.tolist(),
                  "c": c.stats.tolist(), "acc": [a.acceptance_rate, b.acceptance_rate]}))
"""


def _run(flag):
    env = dict(os.environ, ERGMISS_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", _SCRIPT], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(out.stdout)


def test_numba_and_python_paths_agree():
    jit, py = _run("1"), _run("0")
    assert jit.pop("numba") is True and py.pop("numba") is False
    for k in jit:
        assert np.allclose(jit[k], py[k], rtol=0, atol=1e-9), k
