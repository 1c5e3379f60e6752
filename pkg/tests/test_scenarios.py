import csv
import io
import json

import numpy as np
import pytest

from cachefresh import RateAllocation, validate
from cachefresh.scenarios import (
    COLUMNS,
    PRESETS,
    ConfigError,
    ScenarioConfig,
    geometric_lambdas,
    preset,
    rows_to_csv,
    run_scenario,
    write_outputs,
)


def test_geometric_uniform():
    np.testing.assert_allclose(geometric_lambdas(10, 1, 5), [2] * 5, rtol=1e-15)


def test_geometric_two_files():
    # b (1/2 + 1/4) = 3  =>  b = 4
    np.testing.assert_allclose(geometric_lambdas(3, 0.5, 2), [2, 1], rtol=1e-15)


def test_geometric_example1():
    lam = geometric_lambdas(10, 0.7, 15)
    assert len(lam) == 15
    assert lam.sum() == pytest.approx(10, rel=1e-14)
    assert np.all(np.diff(lam) < 0)
    np.testing.assert_allclose(lam[1:] / lam[:-1], 0.7, rtol=1e-12)


@pytest.mark.parametrize("args", [(10, 0.0, 3), (10, 1.2, 3), (0, 0.5, 3), (1, 0.5, 0)])
def test_geometric_rejects(args):
    with pytest.raises(ValueError):
        geometric_lambdas(*args)


def test_example1_rows():
    rows = run_scenario(preset("example1"))
    users = [r for r in rows if r["node"] == "user1"]
    caches = [r for r in rows if r["node"] == "cache1"]
    assert [r["rate"] == 0 for r in users] == [True] * 4 + [False] * 11
    assert [r["rate"] == 0 for r in caches] == [True] * 4 + [False] * 11
    total = rows[-1]
    assert total["node"] == "total" and total["total_objective"] > 0
    assert total["kkt_residual"] <= 1e-8


def _totals(rows):
    return [r for r in rows if r["node"] == "total"]


def test_example3_trends():
    rows = _totals(run_scenario(preset("example3")))
    by_q = {}
    for r in rows:
        q, C = (float(v) for v in r["sweep_value"].split(";"))
        by_q.setdefault(q, []).append((C, r["total_objective"]))
    curves = {q: np.array([v for _, v in sorted(pts)]) for q, pts in by_q.items()}
    for curve in curves.values():
        assert np.all(np.diff(curve) >= 0)
    assert np.all(curves[0.5] >= curves[0.75]) and np.all(curves[0.75] >= curves[1.0])


def test_example5_user_ordering():
    rows = run_scenario(preset("example5"))
    f1 = np.array([r["freshness_analytic"] for r in rows if r["node"] == "user1"])
    f2 = np.array([r["freshness_analytic"] for r in rows if r["node"] == "user2"])
    assert np.all(f2 >= f1)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_emitted_allocation_is_valid(name):
    cfg = preset(name)
    rows = run_scenario(cfg)
    groups = {}
    for r in rows:
        if r["node"] != "total":
            groups.setdefault((r["sweep_param"], r["sweep_value"], r["policy"]), []).append(r)
    points = {(";".join(p), ";".join(f"{float(v):.12g}" for v in p.values())): p for p in cfg.points()}
    assert len(groups) == len(points) * len(cfg.policies)
    for (param, value, _), group in groups.items():
        profile, topo = cfg.build(points[param, value])
        mat = np.array([r["rate"] for r in group]).reshape(topo.m + topo.d, topo.n)
        assert validate(profile, topo, RateAllocation(mat[:topo.m], mat[topo.m:])) == []


def test_csv_byte_stable_with_simulation(tmp_path):
    raw = dict(PRESETS["example1"], simulation={"horizon": 200.0, "replications": 3, "seed": 1})
    cfg = ScenarioConfig.from_dict(raw)
    a = rows_to_csv(run_scenario(cfg, seed=5))
    b = rows_to_csv(run_scenario(cfg, seed=5))
    c = rows_to_csv(run_scenario(cfg, seed=6))
    assert a == b and a != c
    table = list(csv.DictReader(io.StringIO(a)))
    assert tuple(table[0]) == COLUMNS
    assert all(row["freshness_sim_mean"] != "" for row in table)


def test_number_format():
    text = rows_to_csv([{"lambda": 1 / 3, "rate": 0.0, "file_index": 3, "iterations": None}])
    line = text.splitlines()[1].split(",")
    assert line[COLUMNS.index("lambda")] == "0.333333333333"
    assert line[COLUMNS.index("rate")] == "0"
    assert line[COLUMNS.index("file_index")] == "3"
    assert line[COLUMNS.index("iterations")] == ""


def test_write_outputs(tmp_path):
    cfg = preset("example5")
    rows = run_scenario(cfg)
    manifest = write_outputs(rows, tmp_path / "out" / "ex5.csv", cfg, 3, "run")
    meta = json.loads(manifest.read_text())
    assert meta["seed"] == 3 and meta["config"]["scenario_id"] == "example5"
    assert {"cachefresh", "python", "numpy", "simulator_backend"} <= set(meta["versions"])
    assert (tmp_path / "out" / "ex5.csv").read_text() == rows_to_csv(rows)


def test_explicit_lambdas_and_given_allocation():
    cfg = ScenarioConfig.from_dict({
        "scenario_id": "tiny",
        "source": {"lambdas": [1.0]},
        "topology": {"kind": "single", "cache_budgets": [2], "user_budgets": [3]},
        "policies": ["given"],
        "allocation": {"cache_rates": [[2.0]], "user_rates": [[3.0]]},
    })
    rows = run_scenario(cfg)
    assert rows[1]["freshness_analytic"] == pytest.approx(0.5)
    assert rows[-1]["total_objective"] == pytest.approx(0.5)


@pytest.mark.parametrize("raw, fragment", [
    ({"scenario_id": "x", "source": {}, "topology": {"cache_budgets": [1], "user_budgets": [1]}}, "source needs"),
    ({"scenario_id": "x", "source": {"lambdas": [1, 0]},
      "topology": {"cache_budgets": [1], "user_budgets": [1]}}, "infeasible"),
    ({"scenario_id": "x", "source": {"lambdas": [1]},
      "topology": {"cache_budgets": [1], "user_budgets": [1]}, "sweeps": [{"q": [0.5]}]}, "geometric"),
    ({"scenario_id": "x", "source": {"lambdas": [1]},
      "topology": {"cache_budgets": [1], "user_budgets": [1]}, "sweeps": [{"C": []}]}, "no values"),
    ({"scenario_id": "x", "source": {"lambdas": [1]},
      "topology": {"cache_budgets": [1], "user_budgets": [1]}, "sweeps": [{"C3": [1]}]}, "no matching"),
    ({"scenario_id": "x", "source": {"lambdas": [1]}, "topology": {}, "extra": 1}, "unknown config"),
    ({"source": {"lambdas": [1]}, "topology": {}}, "missing"),
])
def test_config_errors(raw, fragment):
    with pytest.raises(ConfigError, match=fragment):
        ScenarioConfig.from_dict(raw)


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ScenarioConfig.load(bad)
    with pytest.raises(ConfigError):
        ScenarioConfig.load(tmp_path / "missing.json")


def test_preset_constants():
    assert PRESETS["example1"]["source"] == {"geometric": {"a": 10, "q": 0.7, "n": 15}}
    ex3 = preset("example3")
    assert ex3.sweeps[0]["C"][0] == 1 and ex3.sweeps[0]["C"][-1] == 10 and len(ex3.sweeps[0]["C"]) == 19
    assert preset("example2").sweeps[1]["a"] == list(range(1, 21))
    with pytest.raises(ConfigError):
        preset("example9")
