import contextlib
import math
import multiprocessing
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple

import pandas as pd

from bounds.eigen_bound import EigenBoundReport, rigorous_bound, worst_case_bound
from bounds.error_ode import (
    FALLBACK_PARAMS,
    BoundParams,
    ErrorBoundState,
    PhiNorms,
    StepCoefficients,
    advance_bound,
    method1_coefficients,
    method2_coefficients,
    select_params,
    step_residual,
)
from classes.fourier_field import FourierField
from pde_solver import SolverConfig, iterate
from run_logging import log

METHODS: Tuple[str, ...] = ("worst_case", "eigenvalue")

STEP_COLUMNS: Tuple[str, ...] = (
    "t", "y", "sqrt_y", "alpha", "beta", "gamma", "res", "lambda_n", "lambda_tilde",
    "worst_case", "delta", "eps_b", "eps_c", "eps_d", "feasible", "phi_h1",
)
TRACE_COLUMNS: Tuple[str, ...] = ("t", "worst_case", "lambda_n", "lambda_tilde", "modes_needed")
CONVERGENCE_COLUMNS: Tuple[str, ...] = ("n", "lambda_n", "lambda_tilde", "gap", "feasible")
BAND_COLUMNS: Tuple[str, ...] = ("t", "phi_h1", "lower", "upper", "threshold")


class Verdict(str, Enum):
    GLOBAL_BY_SMALLNESS = "GlobalBySmallness"
    VERIFIED_UNTIL_HORIZON = "VerifiedUntilHorizon"
    BOUND_BLOWUP = "BoundBlowup"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class VerificationConfig:
    """
    Attributes
    ----------
        solver (SolverConfig): grid of the approximation phi (verification needs record_every = 1)
        method (str): 'worst_case' (Method 1) or 'eigenvalue' (Method 2)
        smallness_threshold (float): certified |u_x| below this gives global regularity
        time_horizon (float | None): T*, user supplied
        eig_n (int | None): n of the rigorous eigenvalue bound, defaults to solver.n_modes
        reoptimize_every (int): steps between parameter optimisations
        residual_samples (int): time samples per step for the residual (3 = endpoints + midpoint)
        residual_safety (float): factor applied to the sampled residual
        y_probe (float): floor of the y at which parameters are optimised
        workers (int): processes computing eigenvalue bounds ahead of the error ODE
        batch_size (int): states handed to the workers at a time
        log_every (int): steps between DEBUG log lines
    """

    solver: SolverConfig
    method: str = "eigenvalue"
    smallness_threshold: float = 0.5
    time_horizon: Optional[float] = None
    eig_n: Optional[int] = None
    reoptimize_every: int = 1000
    residual_samples: int = 3
    residual_safety: float = 1.0
    y_probe: float = 1e-10
    workers: int = 1
    batch_size: int = 64
    log_every: int = 1000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"Invalid method '{self.method}', expected one of {METHODS}")
        if not self.smallness_threshold > 0:
            raise ValueError(f"Invalid smallness threshold: {self.smallness_threshold}")
        if self.time_horizon is not None and not self.time_horizon > 0:
            raise ValueError(f"Invalid time horizon: {self.time_horizon}")
        if self.eig_n is None:
            object.__setattr__(self, "eig_n", self.solver.n_modes)
        if not 1 <= self.eig_n <= self.solver.n_modes:
            raise ValueError(f"eig_n = {self.eig_n} must lie in [1, {self.solver.n_modes}]")
        if self.solver.record_every != 1:
            raise ValueError("Verification needs every solver step (record_every = 1)")
        for name in ("reoptimize_every", "residual_samples", "workers", "batch_size", "log_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"Invalid {name}: {getattr(self, name)}")
        if self.residual_samples < 2:
            raise ValueError(f"Invalid residual_samples: {self.residual_samples}")


@dataclass(frozen=True)
class NodeBounds:
    """Everything the error ODE needs from one node phi_j."""

    t: float
    norms: PhiNorms
    worst_case: float
    report: Optional[EigenBoundReport] = None

    def trace_row(self) -> dict:
        r = self.report
        return {
            "t": self.t,
            "worst_case": self.worst_case,
            "lambda_n": r.lambda_n if r else math.nan,
            "lambda_tilde": r.lambda_rigorous if r and r.feasible else math.nan,
            "modes_needed": r.modes_needed if r else math.nan,
        }


def node_bounds(args: Tuple[float, FourierField, int, bool]) -> NodeBounds:
    """Pool entry point: norms, worst case and (optionally) the rigorous eigenvalue report."""
    t, phi, eig_n, with_eigen = args
    report = rigorous_bound(phi, eig_n) if with_eigen else None
    return NodeBounds(t, PhiNorms.of(phi), worst_case_bound(phi), report)


@dataclass
class VerificationReport:
    method: str
    verdict: Verdict
    t_final: float
    threshold: float
    steps: List[dict] = field(default_factory=list)
    peak_bound: float = 0.0
    feasibility_violations: int = 0
    elapsed: float = 0.0

    def summary(self) -> dict:
        return {
            "method": self.method,
            "verdict": self.verdict.value,
            "t_final": self.t_final,
            "steps": max(len(self.steps) - 1, 0),
            "peak_bound": self.peak_bound,
            "feasibility_violations": self.feasibility_violations,
            "threshold": self.threshold,
            "elapsed": self.elapsed,
        }

    def steps_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.steps, columns=list(STEP_COLUMNS))

    def band(self) -> pd.DataFrame:
        """The region [|phi_x| - sqrt(y), |phi_x| + sqrt(y)] that contains |u_x|."""
        rows = [{
            "t": r["t"],
            "phi_h1": r["phi_h1"],
            "lower": max(0.0, r["phi_h1"] - r["sqrt_y"]),
            "upper": r["phi_h1"] + r["sqrt_y"],
            "threshold": self.threshold,
        } for r in self.steps]
        return pd.DataFrame(rows, columns=list(BAND_COLUMNS))


class BoundPipeline:
    """
    One error-ODE integration (Method 1 or Method 2) fed step by step from a shared stream of nodes.

    Methods
    -------
    start(node)
        records t = 0 and checks the smallness criterion for the initial datum
    advance(left, right, res, h)
        integrates y over [left.t, right.t] and checks the stopping criteria
    report()
        the VerificationReport so far
    """

    def __init__(self, method: str, cfg: VerificationConfig):
        self.method = method
        self.cfg = cfg
        self.state = ErrorBoundState(0.0, 0.0)
        self.params: BoundParams = FALLBACK_PARAMS
        self.steps: List[dict] = []
        self.verdict: Optional[Verdict] = None
        self.violations = 0
        self.peak = 0.0
        self.n_steps = 0

    @property
    def done(self) -> bool:
        return self.verdict is not None

    def _check(self, phi_h1: float) -> None:
        if self.state.blown_up:
            self.verdict = Verdict.BOUND_BLOWUP
        elif phi_h1 + math.sqrt(self.state.y) < self.cfg.smallness_threshold:
            self.verdict = Verdict.GLOBAL_BY_SMALLNESS
        elif self.cfg.time_horizon is not None and self.state.t >= self.cfg.time_horizon:
            self.verdict = Verdict.VERIFIED_UNTIL_HORIZON

    def _record(self, node: NodeBounds, res: float, lam_n: float, lam_tilde: float,
                coeffs, feasible: bool) -> None:
        y = self.state.y
        p = self.params if self.method == "eigenvalue" else None
        self.steps.append({
            "t": self.state.t,
            "y": y,
            "sqrt_y": math.sqrt(y),
            "alpha": coeffs.alpha if coeffs else math.nan,
            "beta": coeffs.beta if coeffs else math.nan,
            "gamma": coeffs.gamma if coeffs else math.nan,
            "res": res,
            "lambda_n": lam_n,
            "lambda_tilde": lam_tilde,
            "worst_case": node.worst_case,
            "delta": p.delta if p else math.nan,
            "eps_b": p.eps_b if p else math.nan,
            "eps_c": p.eps_c if p else math.nan,
            "eps_d": p.eps_d if p else math.nan,
            "feasible": feasible,
            "phi_h1": node.norms.phi_x,
        })

    def start(self, node: NodeBounds) -> None:
        r = node.report
        self._record(node, 0.0, r.lambda_n if r else math.nan,
                     r.lambda_rigorous if r and r.feasible else math.nan, None, bool(r and r.feasible))
        self._check(node.norms.phi_x)

    def _eigen_rate(self, left: NodeBounds, right: NodeBounds) -> Tuple[float, float, bool]:
        # the quadratic form is affine in phi, so the larger endpoint bound holds on the whole step
        lam_n = max(left.report.lambda_n, right.report.lambda_n)
        feasible = left.report.feasible and right.report.feasible
        if feasible:
            return lam_n, max(left.report.lambda_rigorous, right.report.lambda_rigorous), True
        self.violations += 1
        return lam_n, max(left.worst_case, right.worst_case), False

    def _eigen_step(self, lam_tilde: float, norms: PhiNorms, res: float,
                    h: float) -> Tuple[StepCoefficients, ErrorBoundState]:
        reselected = self.n_steps % self.cfg.reoptimize_every == 0
        if reselected:
            self.params = self._select(lam_tilde, norms, res, h)
        coeffs = method2_coefficients(lam_tilde, norms, res, self.params)
        state = advance_bound(self.state, coeffs, h)
        if state.blown_up and not reselected:
            # parameters frozen since the last selection may no longer fit the current y
            self.params = self._select(lam_tilde, norms, res, h)
            coeffs = method2_coefficients(lam_tilde, norms, res, self.params)
            state = advance_bound(self.state, coeffs, h)
        return coeffs, state

    def _select(self, lam_tilde: float, norms: PhiNorms, res: float, h: float) -> BoundParams:
        return select_params(self.state, lam_tilde, norms, res, h, self.cfg.reoptimize_every, self.cfg.y_probe)

    def advance(self, left: NodeBounds, right: NodeBounds, res: float, h: float) -> None:
        norms = left.norms.combine(right.norms)
        lam_n, lam_tilde, feasible = math.nan, math.nan, False
        if self.method == "eigenvalue":
            lam_n, lam_tilde, feasible = self._eigen_rate(left, right)
            coeffs, self.state = self._eigen_step(lam_tilde, norms, res, h)
        else:
            coeffs = method1_coefficients(norms, res)
            if left.report and right.report:
                lam_n = max(left.report.lambda_n, right.report.lambda_n)
                if left.report.feasible and right.report.feasible:
                    lam_tilde = max(left.report.lambda_rigorous, right.report.lambda_rigorous)
                    feasible = True
            self.state = advance_bound(self.state, coeffs, h)
        self.n_steps += 1
        if not self.state.blown_up:
            self.peak = max(self.peak, self.state.y)
            self.state = ErrorBoundState(right.t, self.state.y, self.params, False)
        self._record(right, res, lam_n, lam_tilde, coeffs, feasible)
        self._check(right.norms.phi_x)

    def report(self, t_final: float, elapsed: float) -> VerificationReport:
        return VerificationReport(
            method=self.method,
            verdict=self.verdict or Verdict.INCONCLUSIVE,
            t_final=t_final,
            threshold=self.cfg.smallness_threshold,
            steps=self.steps,
            peak_bound=self.peak,
            feasibility_violations=self.violations,
            elapsed=elapsed,
        )


@contextlib.contextmanager
def _mapper(workers: int) -> Iterator[Callable]:
    if workers <= 1:
        yield lambda fn, items: list(map(fn, items))
        return
    with multiprocessing.Pool(workers) as pool:
        yield pool.map


def _batches(items: Iterable, size: int) -> Iterator[list]:
    batch = []
    for item in items:
        batch.append(item)
        if len(batch) == size:
            yield batch
            batch = []
    if batch:
        yield batch


def _node_stream(u0: FourierField, cfg: VerificationConfig, with_eigen: bool,
                 mapper: Callable) -> Iterator[Tuple[FourierField, NodeBounds]]:
    # the solver runs at most batch_size states ahead of the error ODE
    for batch in _batches(iterate(u0, cfg.solver), cfg.batch_size):
        nodes = mapper(node_bounds, [(t, phi, cfg.eig_n, with_eigen) for t, phi in batch])
        for (_, phi), node in zip(batch, nodes):
            yield phi, node


def _drive(u0: FourierField, cfg: VerificationConfig, pipelines: Sequence[BoundPipeline],
           with_eigen: bool, verbosity: int, log_queue,
           on_node: Optional[Callable[[NodeBounds], None]] = None) -> float:
    h = cfg.solver.dt
    prev_phi, prev_node = None, None
    t_final = 0.0
    j = 0
    with _mapper(cfg.workers) as mapper:
        for phi, node in _node_stream(u0, cfg, with_eigen, mapper):
            if on_node is not None:
                on_node(node)
            if prev_node is None:
                for p in pipelines:
                    p.start(node)
            else:
                res = step_residual(prev_phi, phi, h, cfg.residual_samples, cfg.residual_safety)
                for p in pipelines:
                    if not p.done:
                        p.advance(prev_node, node, res, h)
                j += 1
                if j % cfg.log_every == 0:
                    log(log_queue, verbosity, "DEBUG",
                        f"t={node.t:.6g} res={res:.3e} " + " ".join(
                            f"{p.method}:y={p.state.y:.3e}" for p in pipelines))
            t_final = node.t
            prev_phi, prev_node = phi, node
            if all(p.done for p in pipelines):
                break
    return t_final


def run(u0: FourierField, cfg: VerificationConfig, verbosity: int = 0, log_queue=None) -> VerificationReport:
    start_time = time.perf_counter()
    log(log_queue, verbosity, "INFO",
        f"Verifying with {cfg.method} bound: N={cfg.solver.n_modes}, h={cfg.solver.dt:g}, "
        f"t_end={cfg.solver.t_end:g}, eig_n={cfg.eig_n}")
    pipeline = BoundPipeline(cfg.method, cfg)
    t_final = _drive(u0, cfg, [pipeline], cfg.method == "eigenvalue", verbosity, log_queue)
    report = pipeline.report(t_final, time.perf_counter() - start_time)
    log(log_queue, verbosity, "INFO",
        f"Verdict {report.verdict.value} at t={t_final:.6g}, peak y={report.peak_bound:.3e}, "
        f"infeasible steps={report.feasibility_violations}")
    return report


@dataclass
class ComparisonResult:
    worst_case: VerificationReport
    eigenvalue: VerificationReport
    traces: List[dict]

    def traces_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.traces, columns=list(TRACE_COLUMNS))


def compare_methods(u0: FourierField, cfg: VerificationConfig, verbosity: int = 0,
                    log_queue=None) -> ComparisonResult:
    """Both methods on one solve; traces of the eigenvalue bounds are aligned by node."""
    start_time = time.perf_counter()
    log(log_queue, verbosity, "INFO",
        f"Comparing methods: N={cfg.solver.n_modes}, h={cfg.solver.dt:g}, eig_n={cfg.eig_n}")
    pipelines = [BoundPipeline("worst_case", cfg), BoundPipeline("eigenvalue", cfg)]
    traces: List[dict] = []
    t_final = _drive(u0, cfg, pipelines, True, verbosity, log_queue,
                     on_node=lambda node: traces.append(node.trace_row()))
    elapsed = time.perf_counter() - start_time
    worst, eigen = (p.report(p.state.t if p.done else t_final, elapsed) for p in pipelines)
    for r in (worst, eigen):
        log(log_queue, verbosity, "INFO", f"{r.method}: {r.verdict.value} at t={r.t_final:.6g}")
    return ComparisonResult(worst, eigen, traces)


def convergence_table(phi: FourierField, ns: Sequence[int], verbosity: int = 0,
                      log_queue=None) -> pd.DataFrame:
    rows = []
    for n in ns:
        r = rigorous_bound(phi, n)
        rows.append({
            "n": n,
            "lambda_n": r.lambda_n,
            "lambda_tilde": r.lambda_rigorous if r.feasible else math.nan,
            "gap": r.lambda_rigorous - r.lambda_n if r.feasible else math.nan,
            "feasible": r.feasible,
        })
        log(log_queue, verbosity, "INFO", f"n={n}: lambda_n={r.lambda_n:.6g} feasible={r.feasible}")
    return pd.DataFrame(rows, columns=list(CONVERGENCE_COLUMNS))
