import json
import os

import pandas as pd

from classes.fourier_field import FourierField
from json_output import (
    build_report_output,
    primary_report,
    read_report,
    read_table,
    write_report,
    write_run_outputs,
    write_table,
)
from pde_solver import SolverConfig
from verifier import STEP_COLUMNS, TRACE_COLUMNS, VerificationConfig, compare_methods


def comparison():
    u0 = FourierField.from_terms([(0.3, "sin", 1)], 1)
    cfg = VerificationConfig(solver=SolverConfig(n_modes=8, dt=1e-2, t_end=5e-2), smallness_threshold=0.05)
    result = compare_methods(u0, cfg)
    return result, {"worst_case": result.worst_case, "eigenvalue": result.eigenvalue}


def test_primary_report_prefers_the_eigenvalue_run():
    _, reports = comparison()
    assert primary_report(reports).method == "eigenvalue"
    assert primary_report({"worst_case": reports["worst_case"]}).method == "worst_case"


def test_tables_read_back_exactly(tmp_path):
    _, reports = comparison()
    frame = reports["worst_case"].steps_frame()
    path = write_table(frame, str(tmp_path / "nested" / "steps.csv"))
    back = read_table(path)
    assert list(back.columns) == list(STEP_COLUMNS)
    pd.testing.assert_frame_equal(back, frame, check_exact=True, check_dtype=False)


def test_run_outputs_for_both_methods(tmp_path):
    result, reports = comparison()
    written = write_run_outputs(str(tmp_path), reports, result)
    assert set(written) == {"steps", "smallness", "steps_worst_case", "comparison"}
    assert sorted(os.listdir(tmp_path)) == ["comparison.csv", "smallness.csv", "steps.csv", "steps_worst_case.csv"]
    assert list(read_table(written["comparison"]).columns) == list(TRACE_COLUMNS)
    steps = read_table(written["steps"])
    # the eigenvalue run fills the parameter columns
    assert steps["delta"].notna().all()
    assert read_table(written["steps_worst_case"])["delta"].isna().all()


def test_report_output_and_stdout_line(tmp_path, capsys):
    _, reports = comparison()
    output = build_report_output("demo", "0.3*sin(x)", reports, {"modes": 8})
    line = json.loads(capsys.readouterr().out.strip())
    assert line == {k: output[k] for k in ("run_id", "verdict", "method", "t_final", "peak_bound")}
    assert output["verdict"] == "Inconclusive"
    assert set(output["methods"]) == {"worst_case", "eigenvalue"}

    write_report(str(tmp_path), output)
    assert read_report(str(tmp_path)) == output

    build_report_output("quiet", "0.3*sin(x)", reports, echo=False)
    assert capsys.readouterr().out == ""
