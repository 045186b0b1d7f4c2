import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ergmiss.estimate import EstimationResult
from ergmiss.experiment import RunRecord
from ergmiss.graph import Graph, NodeData
from ergmiss.io.cli import run_cli
from ergmiss.io.config import ConfigError, load_config, parse_config
from ergmiss.io.files import DataError, load_network, save_network, schema_of
from ergmiss.io.output import (RECORD_FIXED, emit_outputs, plot_sweep, record_columns,
                               write_records)

from conftest import random_graph

GOLDEN_HEADER = (
    "network_id,model,fraction,representation,replicate,seed,assumption,target_missing,"
    "n_missing,na_count,observed_edges,centralisation,converged,failure,n_iterations,"
    "theta[edges],theta[gwesp(0.6931)],se[edges],se[gwesp(0.6931)],"
    "mc_se[edges],mc_se[gwesp(0.6931)],mu_zero[edges],mu_zero[gwesp(0.6931)]"
)


def write(path, text):
    path.write_text(text)
    return path


# ---------------------------------------------------------------- files

def test_edge_list_dedup(tmp_path):
    p = write(tmp_path / "e.csv", "source,target\na,b\nb,a\nb,c\n")
    g, data, labels = load_network(p)
    assert labels == ["a", "b", "c"] and g.n == 3 and g.edge_count == 2


def test_self_loop_line(tmp_path):
    p = write(tmp_path / "e.csv", "source,target\na,b\na,a\n")
    with pytest.raises(DataError) as err:
        load_network(p)
    assert err.value.line == 3 and "self-loop" in str(err.value)


def test_missing_attribute_row(tmp_path):
    e = write(tmp_path / "e.csv", "source,target\na,b\nb,c\n")
    a = write(tmp_path / "a.csv", "node,age\na,1\nb,2\n")
    with pytest.raises(DataError, match="'c'"):
        load_network(e, a)


@pytest.mark.parametrize("body,match", [
    ("from,to\na,b\n", "header"),
    ("source,target\na,b,c\n", "fields"),
    ("", "empty"),
])
def test_malformed_edge_lists(tmp_path, body, match):
    with pytest.raises(DataError, match=match):
        load_network(write(tmp_path / "e.csv", body))


def test_attribute_problems(tmp_path):
    e = write(tmp_path / "e.csv", "source,target\na,b\n")
    with pytest.raises(DataError, match="missing value"):
        load_network(e, write(tmp_path / "a.csv", "node,age\na,1\nb,NA\n"))
    with pytest.raises(DataError, match="numeric"):
        load_network(e, write(tmp_path / "b.csv", "node,age\na,1\nb,old\n"), {"age": "numeric"})


def test_round_trip(tmp_path):
    g = Graph.from_edges(6, [(0, 1), (1, 2), (3, 4)])  # vertex 5 isolated
    data = NodeData(6, {"x": np.linspace(-1, 2.5, 6) / 3}, {"club": list("aabbcc")})
    labels = [f"v{k}" for k in range(6)]
    save_network(g, tmp_path / "e.csv", data, tmp_path / "a.csv", labels)
    g2, d2, l2 = load_network(tmp_path / "e.csv", tmp_path / "a.csv", schema_of(data),
                              label_map_path=tmp_path / "labels.json")
    order = [l2.index(v) for v in labels]
    assert np.array_equal(g2.adj[np.ix_(order, order)], g.adj)
    assert np.array_equal(d2.numeric["x"][order], data.numeric["x"])
    assert list(d2.categorical["club"][order]) == list(data.categorical["club"])
    assert json.loads((tmp_path / "labels.json").read_text())["labels"] == l2
    save_network(g2, tmp_path / "e2.csv", d2, tmp_path / "a2.csv", l2)
    g3, d3, l3 = load_network(tmp_path / "e2.csv", tmp_path / "a2.csv", schema_of(d2))
    assert l3 == l2 and g3 == g2
    assert np.array_equal(d3.numeric["x"], d2.numeric["x"])


# ---------------------------------------------------------------- config

def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown"):
        parse_config({"sampler": {"burnin": 10}})
    with pytest.raises(ConfigError, match="unknown"):
        parse_config({"colour": "blue"})


@pytest.mark.parametrize("doc", [
    {"seed": -1}, {"seed": "7"}, {"model": {"terms": []}}, {"model": {"terms": ["gwesp(-1)"]}},
    {"sampler": {"thin": 0}}, {"experiment": {"fractions": [0.0]}},
    {"experiment": {"models": ["nope"]}}, {"sweep": {"parameter": "theta3"}},
    {"network": {"edges": "e.csv", "fixture": "sweep"}}, {"experiment": {"replicates": 0}},
])
def test_config_validation(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_config_hash_and_load(tmp_path):
    p = write(tmp_path / "c.toml", 'seed = 3\n[model]\nterms = ["edges"]\n'
                                   '[experiment]\nmodels = ["hbern"]\nparams.hbern = {p = 0.2}\n')
    cfg = load_config(p)
    assert cfg.seed == 3 and cfg.terms == ["edges"]
    assert cfg.model_params == {"hbern": {"p": 0.2}}
    assert cfg.hash() == load_config(p).hash()
    cfg.seed = 4
    assert cfg.hash() != load_config(p).hash()
    with pytest.raises(ConfigError):
        load_config(write(tmp_path / "bad.toml", "seed = = 3"))


# ---------------------------------------------------------------- outputs

def test_golden_header(tmp_path):
    names = ["edges", "gwesp(0.6931)"]
    assert ",".join(record_columns(names)) == GOLDEN_HEADER
    path = write_records([], names, tmp_path / "r.csv", "abc", 5)
    lines = path.read_text().splitlines()
    assert lines == ["# config_hash=abc base_seed=5", GOLDEN_HEADER]
    assert tuple(record_columns([])) == RECORD_FIXED


def test_empty_outputs_have_no_plots(tmp_path):
    files = emit_outputs(tmp_path, records=[], names=["edges"], config_hash="h", seed=1)
    assert [f.name for f in files] == ["records.csv"]
    assert not list(tmp_path.glob("*.svg"))


def _record(theta):
    res = EstimationResult(["edges"], np.array([theta]), np.array([0.1]), np.eye(1), 4, True, None)
    return RunRecord("n", "hbern", 0.35, "Miss", 0, 9, "HomogeneousMCAR", 16, 16, 16, 10, 0.25,
                     np.array([10.0]), res)


def test_records_rerun_identical(tmp_path):
    recs = [_record(-1.25), _record(float("nan"))]
    a = write_records(recs, ["edges"], tmp_path / "a.csv", "h", 2).read_bytes()
    b = write_records(recs, ["edges"], tmp_path / "b.csv", "h", 2).read_bytes()
    assert a == b
    row = a.decode().splitlines()[2].split(",")
    assert row[record_columns(["edges"]).index("theta[edges]")] == "-1.25"
    assert "nan" in a.decode().splitlines()[3]


class _Table:
    parameter = "theta1_entrainment"
    levels = (-1.0, 0.0, 1.0)
    names = ["edges", "gwesp", "altkstar"]
    baseline = np.array([-2.0, 0.5, 1.0])
    observed_stats = np.array([60.0, 40.0, 80.0])

    def __init__(self):
        self.rows = []
        for q in [f"theta:{n}" for n in self.names] + [f"mu_zero:{n}" for n in self.names]:
            for lv in self.levels:
                self.rows.append(dict(level=lv, quantity=q, mean=lv, lo=lv - 1, hi=lv + 1,
                                      n_used=5, n_failed=0))

    def column(self, q, what="mean"):
        return np.array([r[what] for r in self.rows if r["quantity"] == q])


def test_sweep_plots(tmp_path):
    t = _Table()
    paths = plot_sweep(t, tmp_path / "a", "h", 1)
    assert len(paths) == 6
    assert sum("theta_" in p.name for p in paths) == 3
    again = plot_sweep(t, tmp_path / "b", "h", 1)
    for p, q in zip(paths, again):
        assert p.read_bytes() == q.read_bytes()
        assert b"config_hash=h base_seed=1" in p.read_bytes()


# ---------------------------------------------------------------- CLI

def _cli_config(tmp_path, net):
    save_network(net, tmp_path / "net.csv")
    return write(tmp_path / "c.toml", """
seed = 1
[network]
edges = "net.csv"
[model]
terms = ["edges", "gwesp(log(2))"]
[sampler]
burn_in = 900
thin = 45
n_draws = 200
[fit]
max_iter = 6
[experiment]
models = ["hbern", "ergm_mnar_t3"]
fractions = [0.35]
replicates = 2
""")


def test_cli_experiment_deterministic(tmp_path, capsys):
    net = random_graph(10, 0.3, 7)
    cfg = _cli_config(tmp_path, net)
    assert run_cli(["experiment", "--config", str(cfg), "--seed", "7", "--out",
                    str(tmp_path / "r1")]) == 0
    assert run_cli(["experiment", "--config", str(cfg), "--seed", "7", "--out",
                    str(tmp_path / "r2"), "--threads", "2"]) == 0
    a = (tmp_path / "r1" / "records.csv").read_bytes()
    assert a == (tmp_path / "r2" / "records.csv").read_bytes()
    assert len(a.decode().splitlines()) == 2 + 8
    for f in ("failure_rates.csv", "relative_metrics.csv", "baseline.json"):
        assert (tmp_path / "r1" / f).exists()
    summary = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert summary["records"] == 8


def test_cli_sweep_and_degrade(tmp_path):
    net = random_graph(10, 0.3, 7)
    cfg = _cli_config(tmp_path, net)
    out = tmp_path / "s"
    assert run_cli(["sweep", "--config", str(cfg), "--param", "theta1", "--levels",
                    "-1,-0.5,0,0.5,1", "--replicates", "1", "--out", str(out)]) == 0
    text = (out / "sweep_theta1_entrainment.csv").read_text().splitlines()
    assert text[0].startswith("# config_hash=")
    levels = {line.split(",")[1] for line in text[2:]}
    assert levels == {"-1.0", "-0.5", "0.0", "0.5", "1.0"}
    assert len(list(out.glob("*.svg"))) == 2 * 2 + 2
    assert run_cli(["degrade", "--config", str(cfg), "--out", str(tmp_path / "d")]) == 0
    masks = (tmp_path / "d" / "masks.csv").read_text().splitlines()
    assert len(masks) == 2 + 4


def test_cli_fit_marlab_enumerate(tmp_path, capsys):
    save_network(random_graph(10, 0.3, 2), tmp_path / "e.csv")
    assert run_cli(["fit", "--edges", str(tmp_path / "e.csv"), "--terms", "edges",
                    "--out", str(tmp_path / "f")]) == 0
    doc = json.loads((tmp_path / "f" / "fit.json").read_text())
    assert doc["fit"]["names"] == ["edges"]
    assert run_cli(["marlab"]) == 0
    assert "MAR pair" in capsys.readouterr().out
    assert run_cli(["enumerate", "--n", "4", "--terms", "edges", "--theta", "0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["mean"][0] == pytest.approx(3.0)


def test_cli_error_codes(tmp_path, capsys):
    assert run_cli(["enumerate", "--n", "6"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "UsageError"
    assert run_cli(["frobnicate"]) == 2
    capsys.readouterr()
    bad = write(tmp_path / "c.toml", "[sampler]\nburnin = 3\n")
    assert run_cli(["fit", "--config", str(bad)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"
    loop = write(tmp_path / "e.csv", "source,target\na,b\nc,c\n")
    assert run_cli(["fit", "--edges", str(loop), "--out", str(tmp_path / "o")]) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "DataError" and ":3" in err["message"]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "ergmiss", "marlab"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and "g11" in out.stdout
