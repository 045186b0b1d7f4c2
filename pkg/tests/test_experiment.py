import numpy as np
import pytest

from ergmiss.estimate import EstimationResult, Failure, FitOptions
from ergmiss.experiment import (ExperimentPlan, RunRecord, SweepPlan, aggregate_relative,
                                failure_rate, fast_sampler, mean_value_zero, mnar_sweep,
                                relative_metrics, run_baseline, run_replicates,
                                structural_spec, synthetic_network, with_replicates)
from ergmiss.graph import Graph, apply_mask, degree_centralisation
from ergmiss.missmodels import HomBernoulli, ergm_mnar_t3, target_count
from ergmiss.sampler import SamplerConfig, sample_free
from ergmiss.stats import ModelSpec, edges, gwesp

from conftest import random_graph


@pytest.fixture(scope="module")
def small_net():
    spec = structural_spec().with_theta((-1.0, -0.3, 0.8))
    return sample_free(spec, 10, SamplerConfig(20_000, 1, 1, seed=5), key=(99,)).last


def small_plan(**kw):
    base = dict(network_id="small", spec=ModelSpec([edges(), gwesp()]),
                models=(("hbern", HomBernoulli()), ("mnar", ergm_mnar_t3())),
                fractions=(0.35,), replicates=2, seed=3, sampler=fast_sampler(10, 300),
                miss_sampler=fast_sampler(10, 1), fit=FitOptions(max_iter=15))
    base.update(kw)
    return ExperimentPlan(**base)


def fake_record(converged, theta=(-2.0,), se=(0.8,)):
    res = EstimationResult(["edges"], np.array(theta), np.array(se), np.eye(1), 3, converged,
                           None if converged else Failure.ESS_NOT_REACHED)
    return RunRecord("n", "m", 0.35, "Miss", 0, 0, "MCAR", 1, 1, 1, 1, 0.1, np.zeros(1), res)


def test_plan_validation():
    with pytest.raises(ValueError):
        small_plan(models=())
    with pytest.raises(ValueError):
        small_plan(fractions=(0.0,))
    with pytest.raises(ValueError):
        small_plan(replicates=0)
    with pytest.raises(ValueError):
        small_plan(representations=("Imputed",))
    with pytest.raises(ValueError):
        small_plan(models=(("a", HomBernoulli()), ("a", HomBernoulli())))
    assert small_plan().size == 2 * 1 * 2 * 2


def test_record_count_and_invariants(small_net):
    plan = small_plan(models=(("hbern", HomBernoulli()),))
    recs = run_replicates(plan, small_net)
    assert len(recs) == 4
    m = target_count(0.35, 45)
    for r in recs:
        assert r.n_missing == m == 16
        assert r.na_count == (m if r.representation == "Miss" else 0)
        assert r.mu_zero[0] == r.observed_edges
        assert 0.0 <= r.centralisation <= 1.0


def test_replicates_order_independent(small_net):
    plan = small_plan()
    a = run_replicates(plan, small_net, threads=1)
    b = run_replicates(plan, small_net, threads=3)
    for ra, rb in zip(a, b):
        assert ra.key == rb.key and ra.seed == rb.seed
        assert np.array_equal(ra.result.theta_hat, rb.result.theta_hat, equal_nan=True)
    # a single coordinate reproduces alone
    one = run_replicates(with_replicates(plan, 1), small_net)
    same = [r for r in a if r.replicate == 0]
    assert [r.seed for r in one] == [r.seed for r in same]


def test_baseline_closed_form():
    g = random_graph(20, 0.15, 4)
    res = run_baseline(ModelSpec([edges()]), g, cfg=fast_sampler(20, 1000), seed=1)
    dens = g.edge_count / g.n_dyads
    assert res.converged
    assert res.theta_hat[0] == pytest.approx(np.log(dens / (1 - dens)), abs=0.05)
    again = run_baseline(ModelSpec([edges()]), g, cfg=fast_sampler(20, 1000), seed=1)
    assert np.array_equal(res.theta_hat, again.theta_hat)


def test_failure_rate_arithmetic():
    for fails, want in ((0, 0.0), (50, 1.0), (12, 0.24)):
        recs = [fake_record(k >= fails) for k in range(50)]
        (row,) = failure_rate(recs, ("model",))
        assert row["failure_rate"] == pytest.approx(want)
        assert row["total"] == 50 and row["failures"] == fails


def test_relative_metrics():
    base = fake_record(True, (-4.0,), (0.4,)).result
    rb, rs = relative_metrics(fake_record(True, (-2.0,), (0.8,)), base)
    assert rb[0] == pytest.approx(-0.5) and rs[0] == pytest.approx(2.0)
    rb, rs = relative_metrics(base, base)
    assert rb[0] == 0.0 and rs[0] == 1.0
    zero = fake_record(True, (0.0,), (0.0,)).result
    rb, rs = relative_metrics(fake_record(True), zero)
    assert np.isnan(rb[0]) and np.isnan(rs[0])
    rows = aggregate_relative([fake_record(True), fake_record(True)], zero, ("model",))
    assert rows[0]["n_used"] == 0


def test_mean_value_zero_cases():
    spec = ModelSpec([edges(), gwesp()])
    tri = Graph.from_edges(4, [(0, 1), (1, 2), (0, 2)])
    assert np.array_equal(mean_value_zero(spec, apply_mask(tri, Graph.empty(4))),
                          [3.0, 3.0])
    assert np.array_equal(mean_value_zero(spec, apply_mask(tri, tri)), [0.0, 0.0])
    assert np.array_equal(mean_value_zero(spec, apply_mask(tri, Graph.complete(4))), [0.0, 0.0])


def test_sweep_table_shape(small_net):
    plan = SweepPlan("theta1", (-1.0, 0.0, 1.0), replicates=2, seed=1,
                     sampler=fast_sampler(10, 300), miss_sampler=fast_sampler(10, 1),
                     fit=FitOptions(max_iter=10))
    spec = ModelSpec([edges(), gwesp()])
    tab = mnar_sweep(plan, small_net, spec)
    assert tab.parameter == "theta1_entrainment"
    qs = {r["quantity"] for r in tab.rows}
    want = {f"{k}:{n}" for k in ("theta", "mu_zero") for n in spec.names}
    assert qs == want | {"observed_edges", "centralisation"}
    assert len(tab.runs) == 6
    for r in tab.rows:
        total = r["n_used"] + (r["n_failed"] if r["quantity"].startswith("theta:") else 0)
        assert total == 2
    edges_col = tab.column("observed_edges")
    assert edges_col.shape == (3,)


def test_zero_level_keeps_expected_edges():
    x = synthetic_network("sweep")
    plan = SweepPlan("theta1", (0.0,), replicates=30, seed=2)
    from ergmiss.missmodels import classify_assumption, generate
    assert classify_assumption(plan.model(0.0)).is_mcar
    counts = [apply_mask(x, generate(plan.model(0.0), 30, s, 0.35, x=x,
                                     cfg=fast_sampler(30, 1))).observed_edge_count
              for s in range(300)]
    assert np.mean(counts) == pytest.approx(0.65 * x.edge_count, rel=0.03)


def test_fixtures_are_deterministic():
    for kind in ("sweep", "sparse", "central", "dense"):
        assert synthetic_network(kind) == synthetic_network(kind)
        assert synthetic_network(kind).n == 30
    assert degree_centralisation(synthetic_network("central")) > 0.5
    with pytest.raises(ValueError):
        synthetic_network("huge")
