"""Command-line driver: subcommands, exit codes, determinism, config precedence."""

import json

import pytest

from kolmonet import cli


def run(argv):
    return cli.main(argv)


def test_plan_finite_budget_exit_zero(capsys):
    assert run(["plan", "--d", "1", "--eps", "1", "--kappa", "1", "--eta", "1", "--T", "1", "--p", "2"]) == 0
    out = capsys.readouterr().out
    assert "cost_exponent_c" in out
    assert "log10_" in out or "N " in out


def test_build_then_verify_pass(tmp_path, capsys):
    out = tmp_path / "net.json"
    code = run(
        [
            "build", "--problem", "heat_relu", "--d", "1",
            "--N", "4", "--M", "16", "--delta", "0.015625",
            "--seed", "3", "--out", str(out),
        ]
    )
    assert code == 0
    text = capsys.readouterr().out
    assert "param_count" in text and "ratio" in text
    code = run(
        ["verify", "--in", str(out), "--problem", "heat_relu", "--d", "1", "--samples", "256", "--seed", "5"]
    )
    assert code == 0
    text = capsys.readouterr().out
    assert text.strip().endswith("pass")


def test_verify_corrupted_network_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ definitely not a network")
    assert run(["verify", "--in", str(bad), "--problem", "heat_relu", "--d", "1"]) == 2


def test_verify_missing_file_exit_two(tmp_path):
    assert run(["verify", "--in", str(tmp_path / "absent.json"), "--problem", "heat_relu", "--d", "1"]) == 2


def test_study_calculus_pass(tmp_path, capsys):
    out = tmp_path / "calc.csv"
    assert run(["study", "calculus", "--instances", "60", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "check,instances,failures"


def test_study_csv_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["study", "calculus", "--instances", "40", "--out", str(a)]) == 0
    assert run(["study", "calculus", "--instances", "40", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_build_deterministic_bytes(tmp_path):
    f1, f2 = tmp_path / "n1.json", tmp_path / "n2.json"
    args = ["build", "--problem", "ou_linear", "--d", "1", "--N", "2", "--M", "2", "--delta", "0.25", "--seed", "17"]
    assert run(args + ["--out", str(f1)]) == 0
    assert run(args + ["--out", str(f2)]) == 0
    assert f1.read_bytes() == f2.read_bytes()


def test_config_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 23, "M": 4}))
    out = tmp_path / "n.json"
    # flag --M beats config M; config seed fills the unset flag
    assert run(
        [
            "build", "--problem", "heat_relu", "--d", "1", "--N", "2", "--M", "2",
            "--delta", "0.5", "--config", str(cfg), "--out", str(out),
        ]
    ) == 0
    from kolmonet import build as build_mod

    prov = build_mod.load_solution(out).provenance
    assert prov["seed"] == 23
    assert prov["M"] == 2


def test_unknown_problem_exit_two(capsys):
    with pytest.raises(SystemExit):
        run(["build", "--problem", "unknown", "--d", "1", "--N", "1", "--M", "1", "--delta", "0.5", "--out", "x"])


def test_build_then_verify_reference_budget(tmp_path, capsys):
    # the end-to-end budget (N, M, delta) = (8, 64, 2^-8) driven through files
    out = tmp_path / "heat.json"
    code = run(
        [
            "build", "--problem", "heat_relu", "--d", "1",
            "--N", "8", "--M", "64", "--delta", str(2.0**-8),
            "--seed", "2026", "--out", str(out),
        ]
    )
    assert code == 0
    code = run(
        ["verify", "--in", str(out), "--problem", "heat_relu", "--d", "1", "--samples", "256", "--seed", "11"]
    )
    assert code == 0
    assert capsys.readouterr().out.strip().endswith("pass")
