import json
import os
import sys
from typing import Dict, Optional

import pandas as pd

from verifier import ComparisonResult, VerificationReport

FLOAT_FORMAT = "%.17g"

REPORT_NAME = "report.json"
STEPS_NAME = "steps.csv"
COMPARISON_NAME = "comparison.csv"
CONVERGENCE_NAME = "convergence.csv"
SMALLNESS_NAME = "smallness.csv"


def write_table(frame: pd.DataFrame, path: str) -> str:
    """CSV with a fixed header and 17 significant digits, so reading it back is exact."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def read_table(path: str) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def primary_report(reports: Dict[str, VerificationReport]) -> VerificationReport:
    """The eigenvalue run decides the verdict whenever it was run."""
    return reports.get("eigenvalue") or reports["worst_case"]


def build_report_output(run_id: str, ic: str, reports: Dict[str, VerificationReport],
                        settings: Optional[dict] = None, echo: bool = True) -> dict:
    primary = primary_report(reports)
    output = {
        "run_id": run_id,
        "ic": ic,
        "verdict": primary.verdict.value,
        "method": primary.method,
        "t_final": primary.t_final,
        "peak_bound": primary.peak_bound,
        "methods": {name: r.summary() for name, r in reports.items()},
    }
    if settings is not None:
        output["settings"] = settings

    if echo:
        print_report_line(output)
    return output


def write_report(directory: str, output: dict) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, REPORT_NAME)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(output, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def read_report(directory: str) -> dict:
    with open(os.path.join(directory, REPORT_NAME), "r", encoding="utf-8") as f:
        return json.load(f)


def write_run_outputs(directory: str, reports: Dict[str, VerificationReport],
                      comparison: Optional[ComparisonResult] = None) -> Dict[str, str]:
    """
    steps.csv holds the deciding run's per-step log; with both methods the worst-case
    log goes to steps_worst_case.csv next to it, and comparison.csv holds the bound traces.
    """
    written = {}
    primary = primary_report(reports)
    written["steps"] = write_table(primary.steps_frame(), os.path.join(directory, STEPS_NAME))
    written["smallness"] = write_table(primary.band(), os.path.join(directory, SMALLNESS_NAME))
    for name, r in reports.items():
        if r is not primary:
            written[f"steps_{name}"] = write_table(r.steps_frame(), os.path.join(directory, f"steps_{name}.csv"))
    if comparison is not None:
        written["comparison"] = write_table(comparison.traces_frame(), os.path.join(directory, COMPARISON_NAME))
    return written


def write_convergence(directory: str, frame: pd.DataFrame) -> str:
    return write_table(frame, os.path.join(directory, CONVERGENCE_NAME))


def print_report_line(output: dict) -> None:
    """One JSON line per run on stdout."""
    keys = ("run_id", "verdict", "method", "t_final", "peak_bound", "error")
    sys.stdout.write(json.dumps({k: output[k] for k in keys if k in output}) + "\n")
