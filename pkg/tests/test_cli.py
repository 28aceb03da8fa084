import json

import numpy as np

from rpng.cli import EXIT_CONFIG, EXIT_INVALID, EXIT_OK, main


def _summary(d):
    return json.loads((d / "summary.json").read_text())


def test_simulate_replicas(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--lambda", "1", "--T", "100", "--replicas", "4", "--seed", "1", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.glob("trajectory_*.csv")) == [f"trajectory_{i}.csv" for i in range(4)]
    s = _summary(out)
    assert s["seed"] == 1 and s["config"]["lam"] == 1.0 and s["version"]
    assert s["half_width"] == 800


def test_simulate_without_nucleation(tmp_path):
    out = tmp_path / "zero"
    assert main(["simulate", "--lambda", "0", "--T", "10", "--out", str(out)]) == 0
    rows = (out / "trajectory_0.csv").read_text().splitlines()[1:]
    assert all(r.split(",")[2] == "0" for r in rows)


def test_replay_engines_agree(tmp_path):
    log = tmp_path / "golden.rpng"
    assert main(["replay", "--lambda", "1", "--lambda0", "2", "--T", "20", "--seed", "42", "--save", str(log)]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--engine", "optimized", "--replay", str(log), "--out", str(a)]) == 0
    assert main(["simulate", "--engine", "faithful", "--replay", str(log), "--out", str(b)]) == 0
    assert (a / "trajectory_0.csv").read_bytes() == (b / "trajectory_0.csv").read_bytes()
    assert main(["replay", "--log", str(log), "--compare", "--out", str(tmp_path / "c")]) == 0
    assert _summary(tmp_path / "c")["engines_identical"] is True


def test_scan(tmp_path):
    out = tmp_path / "scan"
    assert main(["scan", "--lambda", "0.5", "--grid", "0.25,0.5,2,3", "--T", "80", "--replicas", "4",
                 "--out", str(out)]) == 0
    rows = (out / "phase_scan.csv").read_text().splitlines()
    assert len(rows) == 5
    assert (out / "phase_scan.svg").exists()


def test_halfline(tmp_path, capsys):
    out = tmp_path / "hl"
    assert main(["halfline", "--lambda0", "0.5", "--T", "5000", "--replicas", "50", "--out", str(out)]) == 0
    assert _summary(out)["mean_N_T_over_T"] < 0.1
    assert "N_T/T" in capsys.readouterr().out


def test_couple(tmp_path):
    out = tmp_path / "c"
    assert main(["couple", "--lambda", "0.5", "--lambda0", "2", "--T", "500", "--out", str(out)]) == 0
    s = _summary(out)
    assert s["monotonicity_violations"] == 0 and s["domination_violations"] == 0
    rows = (out / "coupled_trace_0.csv").read_text().splitlines()[1:]
    assert all(int(r.split(",")[4]) >= 0 for r in rows)


def test_levellines(tmp_path):
    out = tmp_path / "ll"
    assert main(["levellines", "--lambda", "1", "--T", "10", "--seed", "3", "--out", str(out)]) == 0
    doc = json.loads((out / "level_lines.json").read_text())
    assert doc["lines"] and (out / "level_lines.svg").exists()


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# test\nlambda = 0.5\nT = 5\nreplicas = 2\nL = auto\n")
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--T", "7", "--out", str(out)]) == 0
    s = _summary(out)
    assert s["config"]["T"] == 7.0 and s["config"]["lam"] == 0.5 and s["config"]["replicas"] == 2


def test_config_errors(tmp_path):
    assert main(["simulate", "--lambda", "-1", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["simulate", "--T", "abc", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["simulate", "--grid", "3,2", "--T", "5", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    junk = tmp_path / "junk.rpng"
    junk.write_bytes(b"nope")
    assert main(["replay", "--log", str(junk), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["scan", "--lambda", "0.5", "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_strict_boundary(tmp_path):
    args = ["simulate", "--lambda", "1", "--T", "10", "--L", "5", "--out", str(tmp_path / "s")]
    assert main(args) == EXIT_OK
    assert main(args + ["--strict"]) == EXIT_INVALID


def test_deterministic(tmp_path):
    for d in ("a", "b"):
        main(["simulate", "--lambda", "0.5", "--lambda0", "2", "--T", "30", "--replicas", "2", "--seed", "5",
              "--out", str(tmp_path / d)])
    for i in range(2):
        assert (tmp_path / "a" / f"trajectory_{i}.csv").read_bytes() == (tmp_path / "b" / f"trajectory_{i}.csv").read_bytes()
