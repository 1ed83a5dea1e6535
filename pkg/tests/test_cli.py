import csv
import json

import numpy as np
import pytest

from drmlsad.cli import main


@pytest.fixture
def hand_csv(tmp_path):
    p = tmp_path / "hand.csv"
    p.write_text("A,B\n1,0\n0,1\n")
    return p


@pytest.fixture
def panel_csv(tmp_path):
    p = tmp_path / "panel.csv"
    assert main(["gen", "--n", "40", "--m", "4", "--seed", "2", "--out", str(p)]) == 0
    return p


def test_solve_hand(hand_csv, capsys):
    code = main(["solve", "--input", str(hand_csv), "--epsilon", "0.1", "--rho", "0.3"])
    out = json.loads(capsys.readouterr().out)
    assert code == 0 and out["objective"] == pytest.approx(0.1)
    assert out["status"] == "Converged"


def test_solve_solvers_agree(panel_csv, capsys):
    objs = {}
    for s in ("ppdssn", "padmm"):
        assert main(["solve", "--input", str(panel_csv), "--unit", "fraction",
                     "--epsilon", "0.01", "--solver", s, "--tol", "1e-8"]) == 0
        objs[s] = json.loads(capsys.readouterr().out)["objective"]
    assert objs["ppdssn"] == pytest.approx(objs["padmm"], rel=1e-6)


def test_solve_verify_trace_json(hand_csv, tmp_path, capsys):
    out, tr = tmp_path / "r.json", tmp_path / "t.csv"
    code = main(["solve", "--input", str(hand_csv), "--epsilon", "0.1", "--rho", "0.3",
                 "--verify", "--verify-iters", "1000", "--json", str(out),
                 "--trace", str(tr)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["verify"]["lp_objective"] == pytest.approx(0.1)
    assert tr.read_text().startswith("outer,inner")


def test_exit_codes(hand_csv, tmp_path, capsys):
    assert main(["solve", "--input", str(tmp_path / "nope.csv"), "--epsilon", "0.1"]) == 1
    assert "nope.csv" in capsys.readouterr().err
    assert main(["solve", "--input", str(hand_csv), "--epsilon", "0.1", "--rho", "3"]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("A,B\n1,x\n")
    assert main(["solve", "--input", str(bad), "--epsilon", "0.1"]) == 1


def test_iteration_limit_exit_code(panel_csv, capsys, monkeypatch):
    import drmlsad.estimators as est
    from drmlsad.admm import AdmmConfig, padmm_solve
    monkeypatch.setitem(est.SOLVERS, "padmm",
                        lambda prob, tol: padmm_solve(prob, AdmmConfig(tol=tol, max_iter=2)))
    assert main(["solve", "--input", str(panel_csv), "--unit", "fraction", "--epsilon",
                 "0.0", "--solver", "padmm", "--tol", "1e-12"]) == 2


def test_radius_reproducible_and_scalings(panel_csv, capsys):
    args = ["radius", "--input", str(panel_csv), "--unit", "fraction", "--seed", "4"]
    assert main(args) == 0
    a = capsys.readouterr().out
    assert main(args) == 0
    assert capsys.readouterr().out == a
    d = json.loads(a)
    assert d["epsilon_times_sqrt_n"] == pytest.approx(40 * d["epsilon_over_sqrt_n"])


def test_backtest_outputs(panel_csv, tmp_path, capsys):
    out = tmp_path / "bt"
    assert main(["backtest", "--input", str(panel_csv), "--unit", "fraction", "--tau", "36",
                 "--strategy", "naive", "--out-dir", str(out)]) == 0
    rows = list(csv.DictReader((out / "windows.csv").open()))
    assert len(rows) == 4 and all(float(r["asset0"]) == 0.25 for r in rows)
    m = json.loads((out / "metrics.json").read_text())
    assert set(m) >= {"mean", "variance", "sharpe", "turnover", "cvar", "wealth"}
    assert len(list(csv.reader((out / "wealth.csv").open()))) == 6


def test_backtest_window_exceeds_data(panel_csv, tmp_path, capsys):
    assert main(["backtest", "--input", str(panel_csv), "--tau", "40",
                 "--out-dir", str(tmp_path)]) == 1
    assert "window exceeds data" in capsys.readouterr().err


def test_backtest_window_infeasible_exit(panel_csv, tmp_path, capsys, monkeypatch):
    import drmlsad.backtest as bt
    from drmlsad.exceptions import WindowInfeasibleError

    def boom(window, cfg, t=0):
        raise WindowInfeasibleError(t)
    monkeypatch.setattr(bt, "fit_window", boom)
    assert main(["backtest", "--input", str(panel_csv), "--tau", "36",
                 "--out-dir", str(tmp_path)]) == 4
    assert "window 36" in capsys.readouterr().err


def test_bench_and_gen(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert main(["bench", "--sizes", "20x40", "--seed", "1", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["solver"] for r in rows] == ["ppdssn", "padmm", "dadmm"]
    assert "(" in rows[0]["iter"]
    out2 = tmp_path / "b2.csv"
    main(["bench", "--sizes", "20x40", "--seed", "1", "--out", str(out2)])
    strip = lambda p: [{k: v for k, v in r.items() if k != "time"} for r in csv.DictReader(p.open())]
    assert strip(out) == strip(out2)
    assert main(["bench", "--sizes", "20x400", "--rho-rule", "literal"]) == 3
