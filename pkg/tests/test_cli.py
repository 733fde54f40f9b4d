import json

import numpy as np
import pytest

from pointgof.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from pointgof.pattern import read_pattern_csv, unit_square, write_pattern_csv
from pointgof.simulate import MaternCluster, RngSeed, simulate


@pytest.fixture
def clustered_csv(tmp_path):
    path = tmp_path / "clustered.csv"
    write_pattern_csv(simulate(MaternCluster(50, 0.1, 5), unit_square(), RngSeed(2024)), path)
    return path


def test_simulate_poisson(tmp_path, capsys):
    out = tmp_path / "p.csv"
    code = main(["simulate", "--model", "poisson", "--lambda", "100", "--window", "0", "1", "0", "1",
                 "--seed", "42", "--out", str(out)])
    assert code == EXIT_OK
    p = read_pattern_csv(out)
    assert 60 < p.n < 140
    assert f"{p.n} points" in capsys.readouterr().out
    again = tmp_path / "q.csv"
    main(["--seed", "42", "simulate", "--model", "poisson", "--lambda", "100", "--out", str(again)])
    assert again.read_bytes() == out.read_bytes()


def test_simulate_binomial_and_out_dir(tmp_path):
    assert main(["simulate", "--model", "binomial", "--n", "50", "--out-dir", str(tmp_path)]) == EXIT_OK
    assert read_pattern_csv(tmp_path / "pattern.csv").n == 50


def test_simulate_invalid_strauss(tmp_path, capsys):
    code = main(["simulate", "--model", "strauss", "--beta", "100", "--gamma", "1.5", "--radius", "0.05",
                 "--out", str(tmp_path / "s.csv")])
    assert code == EXIT_CONFIG
    assert "gamma" in capsys.readouterr().err


def test_simulate_missing_parameter(tmp_path):
    assert main(["simulate", "--model", "matern", "--kappa", "50", "--out", str(tmp_path / "m.csv")]) == EXIT_CONFIG


def test_test_command_envelope(tmp_path, clustered_csv, capsys):
    env = tmp_path / "env.csv"
    report = tmp_path / "report.json"
    code = main(["test", str(clustered_csv), "--summary", "L", "--stat", "FUN", "--measure", "ERL", "--m", "499",
                 "--envelope", str(env), "--report", str(report), "--seed", "3"])
    assert code == EXIT_OK
    d = json.loads(report.read_text())
    assert d["decision"] == "reject" and d["p_value"] <= 0.05
    assert json.loads(capsys.readouterr().out) == d
    lines = env.read_text().splitlines()
    assert lines[0] == "r,lo,hi,obs,mean" and len(lines) == 514


def test_test_command_is_deterministic(tmp_path, clustered_csv):
    args = ["test", str(clustered_csv), "--stat", "MAD", "--m", "19", "--seed", "9"]
    main(args + ["--report", str(tmp_path / "a.json")])
    main(args + ["--report", str(tmp_path / "b.json"), "--threads", "2"])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_test_command_errors(tmp_path, clustered_csv):
    base = ["test", str(clustered_csv), "--m", "9", "--report", str(tmp_path / "r.json")]
    assert main(base + ["--stat", "point", "--r-index", "600"]) == EXIT_CONFIG
    assert main(base + ["--stat", "point"]) == EXIT_CONFIG
    assert main(base + ["--summary", "nope"]) == EXIT_CONFIG
    assert main(["test", str(tmp_path / "missing.csv")]) == EXIT_CONFIG
    assert main(base + ["--stat", "DCLF", "--envelope", str(tmp_path / "e.csv")]) == EXIT_CONFIG


def test_numeric_failure_exit_code(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("# window 0 1 0 1\nx,y\n0.5,0.5\n")
    code = main(["test", str(path), "--summary", "G", "--m", "5", "--report", str(tmp_path / "r.json")])
    assert code == EXIT_NUMERIC


def test_bits_method(tmp_path, clustered_csv):
    report = tmp_path / "r.json"
    code = main(["test", str(clustered_csv), "--method", "bits", "--m", "4", "--s", "3", "--grid-points", "33",
                 "--report", str(report)])
    assert code == EXIT_OK
    d = json.loads(report.read_text())
    assert d["method"] == "bits" and d["s"] == 3
    assert d["p_value"] * 4 == pytest.approx(round(d["p_value"] * 4))


def test_threads_environment(tmp_path, clustered_csv, monkeypatch):
    monkeypatch.setenv("POINTGOF_THREADS", "zero")
    assert main(["test", str(clustered_csv), "--m", "3", "--report", str(tmp_path / "r.json")]) == EXIT_CONFIG
    monkeypatch.setenv("POINTGOF_THREADS", "2")
    assert main(["test", str(clustered_csv), "--m", "3", "--report", str(tmp_path / "r.json")]) == EXIT_OK
