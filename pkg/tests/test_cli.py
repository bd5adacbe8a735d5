import json
import subprocess
import sys

import numpy as np
import pytest

from stochlq.cli import main

from corpus import lowdim


def run_cli(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_solve_are_prints_json(capsys):
    rc, out, _ = run_cli(capsys, "solve-are", "builtin:lowdim")
    assert rc == 0
    doc = json.loads(out)
    assert doc["cost_star"] == pytest.approx(lowdim()[1].cost_star, rel=1e-14)
    assert np.array(doc["L_star"]).shape == (2, 3)


def test_eval_cost_exact_and_mc(capsys, tmp_path):
    rc, out, _ = run_cli(capsys, "eval-cost", "builtin:lowdim", "--L", "star")
    assert rc == 0 and json.loads(out)["cost"] == pytest.approx(lowdim()[1].cost_star, rel=1e-12)
    dest = tmp_path / "c.json"
    rc, _, _ = run_cli(capsys, "eval-cost", "builtin:lowdim", "--mc", "--N", "300", "--l", "10", "-o", str(dest))
    doc = json.loads(dest.read_text())
    assert rc == 0 and doc["N"] == 300 and doc["stderr"] > 0


def test_grad_commands(capsys, tmp_path):
    pol = tmp_path / "L.json"
    pol.write_text(json.dumps(np.zeros((2, 3)).tolist()))
    rc, out, _ = run_cli(capsys, "grad-exact", "builtin:lowdim", "--L", str(pol))
    g = np.array(json.loads(out)["grad"])
    assert rc == 0 and np.linalg.norm(g) == pytest.approx(7.0976, abs=1e-4)
    rc, out, _ = run_cli(capsys, "grad-estimate", "builtin:lowdim", "--N", "50", "--l", "5", "--seed", "3")
    a = json.loads(out)
    rc, out, _ = run_cli(capsys, "grad-estimate", "builtin:lowdim", "--N", "50", "--l", "5", "--seed", "3")
    assert json.loads(out) == a


def test_config_errors_exit_2(capsys, tmp_path):
    rc, _, err = run_cli(capsys, "eval-cost", "builtin:lowdim", "--L", "[[1, 2]]")
    assert rc == 2 and "config error" in err
    rc, _, _ = run_cli(capsys, "solve-are", "builtin:nope")
    assert rc == 2
    rc, _, _ = run_cli(capsys, "solve-are", str(tmp_path / "missing.json"))
    assert rc == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{\"problem\": \"builtin:lowdim\", \"mode\": \"exact\", \"out_dir\": \"x\", \"N\": -3}")
    rc, _, err = run_cli(capsys, "run", str(bad))
    assert rc == 2 and "N" in err
    rc, _, _ = run_cli(capsys, "train", "builtin:lowdim", "--mode", "exact", "--out", str(tmp_path / "o"))
    assert rc == 2


def test_numerical_failure_exit_3(capsys):
    rc, _, err = run_cli(capsys, "eval-cost", "builtin:lowdim", "--L", "[[5,5,5],[5,5,5]]")
    assert rc == 3 and "not admissible" in err


def test_gen_problem_and_train(capsys, tmp_path):
    f = tmp_path / "p.json"
    assert run_cli(capsys, "gen-problem", "--n", "3", "--m", "2", "--seed", "4", "-o", str(f))[0] == 0
    g = tmp_path / "q.json"
    run_cli(capsys, "gen-problem", "--n", "3", "--m", "2", "--seed", "4", "-o", str(g))
    assert f.read_bytes() == g.read_bytes()
    out = tmp_path / "run"
    rc, text, _ = run_cli(capsys, "train", str(f), "--mode", "exact", "--eta", "0.01", "--iters", "5",
                          "--out", str(out))
    assert rc == 0
    lines = (out / "trace.csv").read_text().strip().split("\n")
    assert len(lines) == 7
    assert json.loads((out / "config.json").read_text())["step_rule"] == "constant:0.01"


def test_train_model_free_no_timing(capsys, tmp_path):
    out = tmp_path / "mf"
    rc, _, _ = run_cli(capsys, "train", "builtin:lowdim", "--mode", "model-free", "--step-rule", "armijo",
                       "--iters", "2", "--N", "64", "--l", "5", "--seeds", "2", "--no-timing", "--out", str(out))
    assert rc == 0
    for name in ("trace_seed000.csv", "trace_seed001.csv", "aggregate.csv", "meta.json"):
        assert (out / name).exists()
    last = [ln.split(",") for ln in (out / "trace_seed000.csv").read_text().strip().split("\n")[1:]]
    assert all(float(row[-1]) == 0.0 for row in last)


def test_bounds_and_bench(capsys, tmp_path):
    rc, _, _ = run_cli(capsys, "bounds", "builtin:lowdim", "--L", "star", "--out", str(tmp_path / "b"))
    assert rc == 0
    rep = json.loads((tmp_path / "b" / "bounds.json").read_text())
    assert rep["h_delta"] > 0
    assert "admissibility_radius" in (tmp_path / "b" / "verification.csv").read_text()
    rc, _, _ = run_cli(capsys, "bench", "builtin:lowdim", "--N-grid", "10", "20", "--reps", "3", "--l", "5",
                       "--out", str(tmp_path / "bench"))
    rows = (tmp_path / "bench" / "bench.csv").read_text().strip().split("\n")
    assert rc == 0 and rows[0] == "N,reps,mean_rel_error,std_rel_error,mean_wall_seconds" and len(rows) == 3


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "stochlq", "solve-are", "builtin:lowdim"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "cost_star" in r.stdout
