import argparse
import json
import math
import os
import sys
from typing import Dict, List, Optional

from bounds.eigen_bound import rigorous_bound, worst_case_bound
from bounds.error_ode import ErrorBoundState, StepCoefficients, advance_bound
from classes.errors import ConfigError, RejectsConstant
from classes.fourier_field import FourierField
from initial_condition import Term, parse_ic
from json_output import print_report_line
from pde_solver import step
from run_config import METHOD_NAMES, load_config_file, parse_convergence, resolve
from run_logging import log, start_logger, stop_logger
from sweep_caller import execute_run, run_sweep, sweep_exit_code
from verifier import Verdict

EXIT_CODES: Dict[str, int] = {
    Verdict.GLOBAL_BY_SMALLNESS.value: 0,
    Verdict.VERIFIED_UNTIL_HORIZON.value: 0,
    Verdict.BOUND_BLOWUP.value: 2,
    Verdict.INCONCLUSIVE.value: 1,
}


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; 2 is reserved for a bound blow-up."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="run",
        description="Surface growth a-posteriori verification: spectral solve plus rigorous H1 error bounds",
    )
    parser.add_argument("--ic", help="initial condition, e.g. '1.5*sin(x) + sin(2x)'")
    parser.add_argument("--ic-list", help="file with one initial condition per line ('run-id: expr' optional)")
    parser.add_argument("--modes", type=int, help="Galerkin modes N")
    parser.add_argument("--dt", type=float, help="time step h")
    parser.add_argument("--t-end", type=float, help="final time")
    parser.add_argument("--method", choices=sorted(METHOD_NAMES), help="error bound: worst, eig or both")
    parser.add_argument("--eig-n", type=int, help="n of the rigorous eigenvalue bound (default N)")
    parser.add_argument("--threshold", type=float, help="H1 smallness threshold (default 0.5)")
    parser.add_argument("--horizon", type=float, help="time T* after which regularity is known")
    parser.add_argument("--reopt-every", type=int, help="steps between parameter optimisations")
    parser.add_argument("--record-every", type=int, help="also save every m-th solver state as a trajectory")
    parser.add_argument("--convergence", help="comma-separated n values; writes convergence.csv only")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int, help="processes for eigenvalue bounds or sweep runs")
    parser.add_argument("--residual-safety", type=float, help="factor on the sampled residual")
    parser.add_argument("--residual-samples", type=int, help="time samples per step for the residual")
    parser.add_argument("--log-every", type=int, help="steps between DEBUG log lines")
    parser.add_argument("-v", "--verbosity", type=int, choices=(0, 1, 2), help="0 silent, 1 info, 2 debug")
    parser.add_argument("--log-file", help="log file (default <out>/run.log)")
    parser.add_argument("--config", help="key=value run file; flags override it")
    parser.add_argument("--seed-check", action="store_true", help="run the built-in self checks and exit")
    return parser


def flag_values(args: argparse.Namespace) -> dict:
    values = {
        "ic": args.ic,
        "modes": args.modes,
        "dt": args.dt,
        "t_end": args.t_end,
        "method": args.method,
        "eig_n": args.eig_n,
        "threshold": args.threshold,
        "horizon": args.horizon,
        "reopt_every": args.reopt_every,
        "record_every": args.record_every,
        "out": args.out,
        "workers": args.workers,
        "residual_safety": args.residual_safety,
        "residual_samples": args.residual_samples,
        "verbosity": args.verbosity,
        "log_every": args.log_every,
        "convergence": None,
    }
    if args.convergence is not None:
        values["convergence"] = parse_convergence(args.convergence)
    return values


def validate_log_file_path(path: str) -> bool:
    """Checks if the log file path is valid and the directory is writable."""
    if not path:
        return False
    try:
        dir_name = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(dir_name):
            os.makedirs(dir_name, exist_ok=True)
        if not os.access(dir_name, os.W_OK):
            return False
    except OSError:
        return False
    return True


def seed_check() -> Dict[str, bool]:
    """Exactly solvable cases: phi = 0 bounds, one linear step, a linear bound step, the parser examples."""
    checks: Dict[str, bool] = {}
    for n in (1, 2, 8):
        report = rigorous_bound(FourierField.zeros(n), n)
        # lambda_n = -1 for every n, but the rigorous value reaches -1 only from n = 2 on:
        # at n = 1 the high-mode term 9 s^2 + |2 lambda_n| - n^4 / 2 = 1.5 is positive, giving -0.25
        expected = -0.25 if n == 1 else -1.0
        checks[f"zero_field_bound_n{n}"] = (report.feasible
                                            and math.isclose(report.lambda_n, -1.0, abs_tol=1e-12)
                                            and math.isclose(report.lambda_rigorous, expected, abs_tol=1e-12))
    checks["zero_field_worst_case"] = worst_case_bound(FourierField.zeros(4)) == -0.5

    h = 1e-3
    stepped = step(FourierField.from_terms([(1.0, "sin", 1)], 4), h, nonlinear=False)
    expected_field = FourierField.from_terms([(1.0 / (1.0 + h), "sin", 1)], 4)
    checks["linear_step"] = bool(abs(stepped.coeffs - expected_field.coeffs).max() < 1e-14)

    state = advance_bound(ErrorBoundState(0.0, 1.0), StepCoefficients(-1.0, 0.0, 0.0), 0.1)
    checks["linear_bound_step"] = math.isclose(state.y, math.exp(-0.1), rel_tol=1e-12)

    checks["parse_2sin"] = parse_ic("2*sin(x)").terms == (Term(2.0, "sin", 1),)
    checks["parse_sum"] = parse_ic("sin(2x)+cos(2x)").terms == (Term(1.0, "sin", 2), Term(1.0, "cos", 2))
    try:
        parse_ic("cos(0x)")
        checks["parse_rejects_constant"] = False
    except RejectsConstant:
        checks["parse_rejects_constant"] = True
    return checks


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if args.seed_check:
        checks = seed_check()
        passed = all(checks.values())
        sys.stdout.write(json.dumps({"seed_check": "passed" if passed else "failed", "checks": checks}) + "\n")
        return 0 if passed else 1

    try:
        file_values = load_config_file(args.config) if args.config else {}
        settings = resolve(file_values, flag_values(args))
    except ConfigError as e:
        sys.stderr.write(f"run: error: {e}\n")
        return 1
    if not settings.ic and not args.ic_list:
        sys.stderr.write("run: error: one of --ic or --ic-list (or 'ic' in the config file) is required\n")
        return 1

    log_file = args.log_file or os.path.join(settings.out, "run.log")
    if not validate_log_file_path(log_file):
        sys.stderr.write(f"run: error: log file path is unwritable: '{log_file}'\n")
        return 1

    log_queue, logger, manager = start_logger(log_file)
    try:
        if args.ic_list:
            outputs = run_sweep(args.ic_list, settings, log_queue)
            for output in outputs:
                print_report_line(output)
            return sweep_exit_code(outputs, EXIT_CODES)

        run_id = os.path.basename(os.path.normpath(os.path.abspath(settings.out))) or "run"
        output = execute_run(run_id, settings.ic, settings, settings.out, log_queue)
        if "verdict" not in output:
            print_report_line(output)
            return 0
        return EXIT_CODES[output["verdict"]]
    except (ValueError, ArithmeticError, RuntimeError, OSError) as e:
        log(log_queue, settings.verbosity, "CRITICAL ERROR", f"{type(e).__name__}: {e}")
        sys.stderr.write(f"run: error: {e}\n")
        return 1
    finally:
        stop_logger(log_queue, logger, manager)


if __name__ == "__main__":
    sys.exit(main())
