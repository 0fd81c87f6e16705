import json
import os

import numpy as np
import pytest

from classes.trajectory import Trajectory
from json_output import read_report, read_table
from run import main, seed_check
from verifier import BAND_COLUMNS, CONVERGENCE_COLUMNS, STEP_COLUMNS, TRACE_COLUMNS

SMALL = ["--modes", "8", "--dt", "0.01", "--t-end", "1", "--threshold", "0.1", "-v", "1"]


def stdout_lines(capsys):
    return [json.loads(line) for line in capsys.readouterr().out.splitlines() if line.strip()]


def test_small_run_reaches_smallness(tmp_path, capsys):
    out = tmp_path / "small"
    assert main(["--ic", "0.1*sin(x)", "--out", str(out)] + SMALL) == 0
    assert sorted(os.listdir(out)) == ["report.json", "run.log", "smallness.csv", "steps.csv"]
    report = read_report(str(out))
    assert report["run_id"] == "small"
    assert report["verdict"] == "GlobalBySmallness"
    assert report["method"] == "eigenvalue"
    assert list(read_table(str(out / "steps.csv")).columns) == list(STEP_COLUMNS)
    assert list(read_table(str(out / "smallness.csv")).columns) == list(BAND_COLUMNS)
    line = stdout_lines(capsys)[-1]
    assert line["run_id"] == "small" and line["verdict"] == "GlobalBySmallness"
    with open(out / "run.log", "r", encoding="utf-8") as f:
        assert "[INFO]" in f.read()


def test_both_methods_write_comparison(tmp_path):
    out = tmp_path / "both"
    assert main(["--ic", "0.1*sin(x)", "--out", str(out), "--method", "both"] + SMALL) == 0
    assert {"steps.csv", "steps_worst_case.csv", "comparison.csv", "smallness.csv"} <= set(os.listdir(out))
    assert list(read_table(str(out / "comparison.csv")).columns) == list(TRACE_COLUMNS)
    report = read_report(str(out))
    assert set(report["methods"]) == {"worst_case", "eigenvalue"}
    assert report["method"] == "eigenvalue"


def test_exit_codes(tmp_path):
    blowup = ["--ic", "2*sin(x)", "--modes", "16", "--dt", "1e-3", "--t-end", "0.5", "--method", "worst"]
    assert main(blowup + ["--out", str(tmp_path / "blowup")]) == 2
    inconclusive = ["--ic", "0.3*sin(x)", "--modes", "8", "--dt", "0.01", "--t-end", "0.05", "--threshold", "0.05"]
    assert main(inconclusive + ["--out", str(tmp_path / "inconclusive")]) == 1
    horizon = inconclusive + ["--horizon", "0.02"]
    assert main(horizon + ["--out", str(tmp_path / "horizon")]) == 0
    assert read_report(str(tmp_path / "horizon"))["verdict"] == "VerifiedUntilHorizon"


@pytest.mark.parametrize("argv", [
    ["--ic", "0"],
    ["--ic", "sin(0x)"],
    ["--bogus"],
    ["--method", "interval", "--ic", "sin(x)"],
    ["--ic", "sin(x)", "--convergence", "8,x"],
    ["--ic", "sin(x)", "--modes", "0"],
    [],
])
def test_errors_exit_with_one(tmp_path, argv, capsys):
    assert main(argv + ["--out", str(tmp_path / "err")]) == 1
    assert "error" in capsys.readouterr().err


def test_convergence_mode(tmp_path, capsys):
    out = tmp_path / "conv"
    ns = "2,4,8,12,16,20,24,32"
    argv = ["--ic", "sin(x)", "--modes", "8", "--dt", "1e-3", "--t-end", "1e-3", "--convergence", ns]
    assert main(argv + ["--out", str(out)]) == 0
    table = read_table(str(out / "convergence.csv"))
    assert list(table.columns) == list(CONVERGENCE_COLUMNS)
    assert list(table["n"]) == [2, 4, 8, 12, 16, 20, 24, 32]
    assert list(table["feasible"]) == [False] * 5 + [True] * 3
    report = read_report(str(out))
    assert report["t"] == pytest.approx(1e-3)
    rows = report["convergence"]
    assert len(rows) == 8
    assert rows[0]["gap"] is None and rows[-1]["gap"] > 0
    assert stdout_lines(capsys)[-1] == {"run_id": "conv"}


def convergence_run(tmp_path, ns: str):
    out = tmp_path / "sin7"
    argv = ["--ic", "sin(7x)", "--modes", "64", "--dt", "1e-5", "--t-end", "3e-3", "--convergence", ns]
    assert main(argv + ["--out", str(out)]) == 0
    assert read_report(str(out))["t"] == pytest.approx(3e-3)
    return read_table(str(out / "convergence.csv"))


def test_convergence_is_taken_after_a_short_run(tmp_path):
    table = convergence_run(tmp_path, "8,16,32,64,128")
    assert table["feasible"].all()
    assert not table["gap"].isna().any()
    assert (np.diff(table["gap"]) < 0).all()


@pytest.mark.slow
def test_convergence_over_the_published_mode_counts(tmp_path):
    table = convergence_run(tmp_path, "8,16,32,64,128,256,512,1024")
    assert len(table) == 8
    assert not table["gap"].isna().any()
    slope = np.polyfit(np.log(table["n"].iloc[-4:]), np.log(table["gap"].iloc[-4:]), 1)[0]
    assert -2.6 <= slope <= -1.4


def test_runs_are_reproducible(tmp_path):
    for name in ("first", "second"):
        assert main(["--ic", "0.1*sin(x)", "--out", str(tmp_path / name)] + SMALL) == 0
    for table in ("steps.csv", "smallness.csv"):
        assert (tmp_path / "first" / table).read_bytes() == (tmp_path / "second" / table).read_bytes()


def test_config_file_and_flag_override(tmp_path):
    config = tmp_path / "run.ini"
    config.write_text("ic = 0.1*sin(x)\nmodes = 8\ndt = 0.01\nt_end = 1\nthreshold = 0.1\nmethod = worst\n",
                      encoding="utf-8")
    out = tmp_path / "configured"
    assert main(["--config", str(config), "--out", str(out)]) == 0
    report = read_report(str(out))
    assert report["method"] == "worst_case"
    assert report["settings"]["modes"] == 8

    assert main(["--config", str(config), "--method", "eig", "--out", str(out)]) == 0
    assert read_report(str(out))["method"] == "eigenvalue"


def test_record_every_saves_a_trajectory(tmp_path):
    out = tmp_path / "traj"
    argv = ["--ic", "0.3*sin(x)", "--modes", "8", "--dt", "0.01", "--t-end", "0.05", "--record-every", "2"]
    assert main(argv + ["--out", str(out)]) == 1
    traj = Trajectory.load(str(out))
    assert list(traj.times) == pytest.approx([0.0, 0.02, 0.04, 0.05])


def test_sweep_from_the_command_line(tmp_path, capsys):
    ic_list = tmp_path / "ic_list.txt"
    ic_list.write_text("a: 0.1*sin(x)\nb: 0.09*sin(x)\n", encoding="utf-8")
    out = tmp_path / "sweep"
    assert main(["--ic-list", str(ic_list), "--out", str(out), "--workers", "2"] + SMALL) == 0
    assert [line["run_id"] for line in stdout_lines(capsys)] == ["a", "b"]
    assert os.path.isfile(out / "a" / "steps.csv") and os.path.isfile(out / "run.log")


def test_seed_check(capsys):
    assert all(seed_check().values())
    assert main(["--seed-check"]) == 0
    assert stdout_lines(capsys)[-1]["seed_check"] == "passed"
