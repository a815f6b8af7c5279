import csv
import io
import json

import numpy as np
import pytest

from cacherec.cli import main
from cacherec.experiments import CSV_HEADER
from cacherec.model import Scenario
from cacherec.scenarios import load_matrix, save_scenario

GEN = ["gen", "--k", "20", "--n", "2", "--zipf-s", "0.8", "--zipf-beta", "1.0", "--l", "4",
       "--alpha", "0.8", "--q", "0.9", "--cache", "2", "--seed", "3"]


@pytest.fixture
def bundle(tmp_path):
    out = tmp_path / "sc"
    assert main(GEN + ["--out", str(out)]) == 0
    return out


def run(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr()


def test_gen_writes_bundle_deterministically(tmp_path, bundle):
    assert sorted(p.name for p in bundle.iterdir()) == ["c.txt", "p0.txt", "params.json",
                                                        "u.txt"]
    other = tmp_path / "again"
    main(GEN + ["--out", str(other)])
    for name in ("c.txt", "p0.txt", "params.json", "u.txt"):
        assert (bundle / name).read_bytes() == (other / name).read_bytes()


def test_missing_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--n", "2", "--l", "3", "--out", "x"])
    assert exc.value.code == 2
    assert "--k" in capsys.readouterr().err


def test_gen_invalid_range_is_usage_error(tmp_path, capsys):
    code, out = run(capsys, ["gen", "--k", "5", "--n", "2", "--l", "9", "--out",
                             str(tmp_path / "x")])
    assert code == 2 and "L" in out.err


@pytest.mark.parametrize("method", ["optimal", "greedy", "cars", "hybrid", "baseline"])
def test_solve_prints_json(capsys, bundle, tmp_path, method):
    code, out = run(capsys, ["solve", "--scenario", str(bundle), "--method", method,
                             "--pmin", "0.2", "--out", str(tmp_path / "pol")])
    assert code == 0
    res = json.loads(out.out)
    assert res["method"] == method
    assert res["hit_rate"] == pytest.approx(1 - res["cost_per_content"])
    assert ("K_prime" in res) == (method == "hybrid")
    R1 = load_matrix(tmp_path / "pol" / "R1.txt")
    assert R1.shape == (20, 20)
    assert np.allclose(R1.sum(axis=1), 1.0, atol=1e-9)


def test_all_cached_hits_everything(capsys, tmp_path):
    s = Scenario(p0=np.full(4, 0.25), U=np.ones((4, 4)) - np.eye(4), c=np.zeros(4),
                 v=[0.5, 0.5], alpha=0.7, q=0.9)
    save_scenario(s, tmp_path / "cached")
    for method in ("optimal", "greedy", "cars", "hybrid"):
        _, out = run(capsys, ["solve", "--scenario", str(tmp_path / "cached"),
                              "--method", method])
        assert json.loads(out.out)["hit_rate"] == pytest.approx(1.0, abs=1e-12)


def test_two_contents_optimal_equals_greedy(capsys, tmp_path):
    s = Scenario(p0=[0.3, 0.7], U=[[0, 1], [1, 0]], c=[0, 1], v=[1.0], alpha=0.6, q=1.0)
    save_scenario(s, tmp_path / "two")
    res = {}
    for m in ("optimal", "greedy"):
        _, out = run(capsys, ["solve", "--scenario", str(tmp_path / "two"), "--method", m])
        res[m] = json.loads(out.out)
    assert res["optimal"]["cost_per_content"] == pytest.approx(
        res["greedy"]["cost_per_content"], abs=1e-12)


def test_invalid_scenario_exit_code(capsys, tmp_path):
    s = Scenario(p0=[0.5, 0.5, 0.0], U=np.ones((3, 3)) - np.eye(3), c=[0, 1, 1], v=[1.0],
                 alpha=0.5, q=0.5)
    save_scenario(s, tmp_path / "bad")
    code, out = run(capsys, ["solve", "--scenario", str(tmp_path / "bad")])
    assert code == 3
    assert "p0 strictly positive" in out.err
    code, out = run(capsys, ["solve", "--scenario", str(tmp_path / "missing")])
    assert code == 3


def test_unknown_method_is_usage_error(bundle):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--scenario", str(bundle), "--method", "magic"])
    assert exc.value.code == 2


def parse(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], [dict(zip(rows[0], r)) for r in rows[1:]]


def test_sweep_csv_schema_and_order(capsys, bundle, tmp_path):
    out_csv = tmp_path / "q.csv"
    code, out = run(capsys, ["sweep", "--scenario", str(bundle), "--param", "q",
                             "--values", "0.5", "0.9", "--methods", "optimal", "greedy",
                             "--seeds", "1", "2", "--csv", str(out_csv)])
    assert code == 0
    header, rows = parse(out_csv.read_text())
    assert header == CSV_HEADER
    assert ",".join(header) == "param,value,method,seed,hit_rate,cost,entropy,wall_ms,status"
    assert [(r["value"], r["method"], r["seed"]) for r in rows] == [
        (v, m, sd) for v in ("0.5", "0.9") for m in ("optimal", "greedy") for sd in ("1", "2")]
    assert all(r["status"] == "ok" and 0 <= float(r["hit_rate"]) <= 1 for r in rows)
    assert "mph" in out.err


def test_sweep_without_timing_is_byte_identical(capsys, bundle, tmp_path, monkeypatch):
    argv = ["sweep", "--scenario", str(bundle), "--param", "entropy", "--values", "0", "1",
            "2", "--methods", "optimal", "cars", "--no-timing"]
    _, a = run(capsys, argv)
    monkeypatch.setenv("CACHEREC_THREADS", "3")
    _, b = run(capsys, argv)
    assert a.out == b.out
    header, rows = parse(a.out)
    assert all(r["wall_ms"] == "" for r in rows)
    ent = [float(r["entropy"]) for r in rows if r["method"] == "optimal"]
    assert ent == sorted(ent, reverse=True)


def test_sweep_records_failures(capsys, bundle):
    code, out = run(capsys, ["sweep", "--scenario", str(bundle), "--param", "alpha",
                             "--values", "0.5", "1.5", "--methods", "optimal"])
    assert code == 0
    _, rows = parse(out.out)
    assert rows[0]["status"] == "ok"
    assert rows[1]["status"].startswith("error:")
    assert "1 of 2 points failed" in out.err


def test_n_sweep_cars_matches_optimal_at_one_slot(capsys, bundle):
    _, out = run(capsys, ["sweep", "--scenario", str(bundle), "--param", "n",
                          "--values", "1", "2", "--methods", "optimal", "cars"])
    _, rows = parse(out.out)
    at1 = {r["method"]: float(r["cost"]) for r in rows if r["value"] == "1"}
    assert abs(at1["optimal"] - at1["cars"]) < 1e-9


def test_pshrink(capsys):
    _, out = run(capsys, ["pshrink", "--k", "10", "--kprime", "5", "--l", "1", "--n", "1"])
    assert json.loads(out.out) == {"analytic": 0.03125}
    _, out = run(capsys, ["pshrink", "--k", "10", "--kprime", "10", "--l", "3", "--n", "2"])
    assert json.loads(out.out)["analytic"] == 1.0
    _, out = run(capsys, ["pshrink", "--k", "30", "--kprime", "20", "--l", "5", "--n", "2",
                          "--mc", "20000", "--seed", "1"])
    res = json.loads(out.out)
    assert res["abs_gap"] == pytest.approx(abs(res["analytic"] - res["monte_carlo"]))
    assert res["abs_gap"] < 1e-2
    code, _ = run(capsys, ["pshrink", "--k", "10", "--kprime", "20", "--l", "1", "--n", "1"])
    assert code == 2
