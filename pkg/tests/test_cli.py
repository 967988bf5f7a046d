"""Command-line interface: run, verify, sweep, presets."""

from dataclasses import replace

import pytest

from antago.cli import main
from antago.engine import diagnostics, simulate
from antago.scenario_io import (
    load_preset,
    load_trajectory_csv,
    save_scenario,
    serialize_scenario,
)


@pytest.fixture()
def short_scenario_file(tmp_path, study):
    """A fast-running scenario file for flag tests."""
    scenario = replace(study, duration=0.2)
    path = tmp_path / "short.ini"
    save_scenario(scenario, path)
    return path


def test_run_preset_writes_csv_and_summary(tmp_path, capsys):
    out = tmp_path / "f1.csv"
    assert main(["run", "fig2-F1", "--out", str(out)]) == 0
    captured = capsys.readouterr().out
    assert "status: ok" in captured
    assert "settle time" in captured
    record = load_trajectory_csv(out)
    assert record.status == "ok"
    assert len(record) == 2001
    # converged run: final position at the target, estimate at the true force
    assert abs(record["x"][-1] - 1e-3) < 1e-5
    assert abs(record["F_tilde"][-1]) < 1e-3


def test_run_scenario_file(short_scenario_file, tmp_path, capsys):
    out = tmp_path / "short.csv"
    assert main(["run", str(short_scenario_file), "--out", str(out)]) == 0
    assert out.is_file()


def test_run_solver_flags(short_scenario_file, tmp_path):
    out = tmp_path / "short.csv"
    rc = main(["run", str(short_scenario_file), "--out", str(out),
               "--method", "rk4", "--rel-tol", "1e-7", "--abs-tol", "1e-9"])
    assert rc == 0


def test_run_missing_scenario_errors(capsys):
    assert main(["run", "no-such-preset"]) == 1
    assert "error" in capsys.readouterr().err


def test_run_malformed_key_names_expected(tmp_path, study, capsys):
    text = serialize_scenario(study).replace("Gamma0 =", "gamma0 =")
    bad = tmp_path / "bad.ini"
    bad.write_text(text)
    assert main(["run", str(bad)]) == 1
    assert "Gamma0" in capsys.readouterr().err


def test_run_domain_exit_is_nonzero(tmp_path, study, capsys):
    exploding = replace(study, duration=2.0,
                        force=replace(study.force, kind="constant", value=0.5))
    path = tmp_path / "push.ini"
    save_scenario(exploding, path)
    out = tmp_path / "push.csv"
    assert main(["run", str(path), "--out", str(out)]) == 1
    assert "domain-exit" in capsys.readouterr().out
    assert load_trajectory_csv(out).status == "domain-exit"


def test_verify_matching_and_gains(capsys):
    assert main(["verify", "matching", "--seed", "7"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert main(["verify", "gains"]) == 0
    out = capsys.readouterr().out
    assert "49.37" in out
    assert "80" in out  # discrepancy note


def test_verify_gradients_and_observer(capsys):
    assert main(["verify", "gradients"]) == 0
    assert main(["verify", "observer-decay"]) == 0


def test_presets_listing(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out.split()
    assert out == ["fig2-F1", "fig2-F2", "fig2-F3", "multistep"]


def test_sweep_alpha_validity_flip(tmp_path, short_scenario_file, capsys):
    out = tmp_path / "sweep.csv"
    rc = main(["sweep", "alpha", str(short_scenario_file),
               "--values", "15,18,21", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
    valid = [r["valid"] for r in rows]
    # validity flips between 18 and 21 (damping bound near 19.75)
    assert valid == ["true", "true", "false"]


def test_sweep_epsilon_bound(tmp_path, short_scenario_file):
    out = tmp_path / "eps.csv"
    rc = main(["sweep", "epsilon", str(short_scenario_file),
               "--values", "0,6,7,49,50", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
    # positive definiteness under the perturbed matrix fails past ~6.53
    assert [r["positive_definite"] for r in rows] == \
        ["true", "true", "false", "false", "false"]
    # the solvability bound fails past ~49.37
    assert [r["rate_bound_ok"] for r in rows] == \
        ["true", "true", "true", "true", "false"]


def test_sweep_single_value_matches_run(tmp_path, short_scenario_file):
    out = tmp_path / "one.csv"
    assert main(["sweep", "alpha", str(short_scenario_file),
                 "--values", "10", "--out", str(out)]) == 0
    row = out.read_text().splitlines()[1].split(",")
    header = out.read_text().splitlines()[0].split(",")
    swept = dict(zip(header, row))
    from antago.scenario_io import load_scenario
    scenario = load_scenario(short_scenario_file)
    summary = diagnostics(simulate(scenario), scenario.gains, scenario.params)
    assert float(swept["x_error"]) == summary.x_error
    assert float(swept["settle_time"]) == summary.settle_time


def test_sweep_range_syntax(tmp_path, short_scenario_file):
    out = tmp_path / "rng.csv"
    assert main(["sweep", "k_i", str(short_scenario_file),
                 "--values", "5:15:3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    assert [float(ln.split(",")[0]) for ln in lines[1:]] == [5.0, 10.0, 15.0]
