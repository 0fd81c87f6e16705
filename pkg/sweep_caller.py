import multiprocessing
import os
import re
import time
from dataclasses import asdict, replace
from typing import Dict, List, Tuple

import verifier
from classes.errors import ConfigError
from classes.trajectory import Trajectory
from initial_condition import parse_ic
from json_output import build_report_output, write_convergence, write_report, write_run_outputs
from pde_solver import integrate
from run_config import RunSettings
from run_logging import log

FAILED = "Failed"

_LINE_PATTERN = re.compile(r"^(?P<run_id>[A-Za-z0-9_.-]+)\s*:\s*(?P<expr>.+)$")


def parse_ic_list(filepath: str) -> List[Tuple[str, str]]:
    """
    One initial condition per line, optionally prefixed 'run-id: '. Blank lines and
    lines starting with '#' are skipped; unnamed runs are numbered run-001, run-002, ..
    """
    runs: List[Tuple[str, str]] = []
    with open(filepath, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            match = _LINE_PATTERN.match(line)
            if match:
                runs.append((match.group("run_id"), match.group("expr").strip()))
            else:
                runs.append((f"run-{len(runs) + 1:03d}", line))
    ids = [run_id for run_id, _ in runs]
    duplicates = sorted({x for x in ids if ids.count(x) > 1})
    if duplicates:
        raise ConfigError(f"Duplicate run ids in '{filepath}': {duplicates}")
    if not runs:
        raise ConfigError(f"No initial conditions in '{filepath}'")
    return runs


def execute_run(run_id: str, ic_text: str, settings: RunSettings, directory: str,
                log_queue=None, echo: bool = True) -> dict:
    """Parses the initial condition, runs the requested bounds and writes the run's files."""
    verbosity = settings.verbosity
    expr = parse_ic(ic_text)
    u0 = expr.to_field(max(settings.modes, expr.max_wavenumber) if settings.convergence else settings.modes)
    os.makedirs(directory, exist_ok=True)

    if settings.convergence:
        # the table is taken at phi(t_end) of a plain solve on the run's grid
        solver = replace(settings.solver_config(), n_modes=u0.n_modes)
        traj = integrate(u0, replace(solver, record_every=solver.n_steps), verbosity, log_queue)
        t_phi = float(traj.times[-1])
        frame = verifier.convergence_table(traj.states[-1], settings.convergence, verbosity, log_queue)
        write_convergence(directory, frame)
        # NaN is not valid JSON
        rows = frame.astype(object).where(frame.notna(), None).to_dict(orient="records")
        output = {"run_id": run_id, "ic": expr.render(), "t": t_phi, "convergence": rows}
        write_report(directory, output)
        return output

    if settings.record_every:
        traj: Trajectory = integrate(u0, replace(settings.solver_config(), record_every=settings.record_every),
                                     verbosity, log_queue)
        traj.save(directory)

    comparison = None
    if settings.method == "both":
        comparison = verifier.compare_methods(u0, settings.verification_config("eigenvalue"), verbosity, log_queue)
        reports = {"worst_case": comparison.worst_case, "eigenvalue": comparison.eigenvalue}
    else:
        method = settings.methods[0]
        reports = {method: verifier.run(u0, settings.verification_config(method), verbosity, log_queue)}

    write_run_outputs(directory, reports, comparison)
    output = build_report_output(run_id, expr.render(), reports, asdict(settings), echo=echo)
    write_report(directory, output)
    return output


def process_worker(result_queue, log_queue, run_id: str, ic_text: str, settings: RunSettings,
                   directory: str) -> None:
    """
    Worker that executes one run and reports its outcome; a failing run is
    reported with verdict 'Failed' instead of taking the sweep down.
    """
    start_time = time.perf_counter()
    try:
        output = execute_run(run_id, ic_text, settings, directory, log_queue, echo=False)
    except Exception as e:  # pylint: disable=broad-except
        log(log_queue, settings.verbosity, "CRITICAL ERROR", f"Run '{run_id}' failed: {e}")
        output = {"run_id": run_id, "ic": ic_text, "verdict": FAILED, "error": str(e)}
    output["elapsed"] = time.perf_counter() - start_time
    result_queue.put((run_id, output))


def run_sweep(filepath: str, settings: RunSettings, log_queue=None) -> List[dict]:
    """
    Runs every initial condition of an ic-list file in its own process, at most
    settings.workers at a time, each writing to <out>/<run-id>/. Results come back
    in file order.
    """
    runs = parse_ic_list(filepath)
    verbosity = settings.verbosity
    # parallelism is across runs, so each run verifies on a single process
    run_settings = replace(settings, workers=1)
    wave = max(1, settings.workers)
    results_queue = multiprocessing.Queue()
    outputs: Dict[str, dict] = {}

    log(log_queue, verbosity, "INFO", f"Sweep of {len(runs)} runs from '{filepath}', {wave} at a time")
    for start in range(0, len(runs), wave):
        processes: List[multiprocessing.Process] = []
        for run_id, ic_text in runs[start:start + wave]:
            directory = os.path.join(settings.out, run_id)
            process = multiprocessing.Process(
                target=process_worker,
                args=(results_queue, log_queue, run_id, ic_text, run_settings, directory),
            )
            processes.append(process)
            log(log_queue, verbosity, "INFO", f"Queued: {run_id} ({ic_text})")
        for p in processes:
            p.start()
        # drain before join so no child blocks on a full queue
        for _ in processes:
            run_id, output = results_queue.get()
            outputs[run_id] = output
        for p in processes:
            p.join()

    log(log_queue, verbosity, "INFO", "--- All runs have completed ---")
    return [outputs[run_id] for run_id, _ in runs]


def sweep_exit_code(outputs: List[dict], exit_codes: Dict[str, int]) -> int:
    # convergence-only runs carry no verdict
    codes = [exit_codes.get(o["verdict"], 1) if "verdict" in o else 0 for o in outputs]
    if any(c == 1 for c in codes):
        return 1
    return max(codes, default=0)

