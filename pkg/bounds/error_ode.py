import math
from dataclasses import asdict, dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from classes.errors import InvalidParams
from classes.fourier_field import FourierField
from classes.trajectory import Trajectory

QUINTIC_WORST_CASE: float = 7.0 ** 7 / 2.0
MAX_CAP_DOUBLINGS: int = 40
CAP_ATOL: float = 1e-300
PARAM_BOX: Tuple[float, float] = (0.05, 0.95)


@dataclass(frozen=True)
class BoundParams:
    """Young-inequality weights of the eigenvalue-based bounding ODE."""

    delta: float = 0.5
    eps_b: float = 1.0 / 3.0
    eps_c: float = 1.0 / 3.0
    eps_d: float = 1.0 / 3.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise InvalidParams(f"delta must lie in (0, 1), got {self.delta}")
        if min(self.eps_b, self.eps_c, self.eps_d) <= 0.0:
            raise InvalidParams(f"eps must be positive, got ({self.eps_b}, {self.eps_c}, {self.eps_d})")
        total = self.eps_b + self.eps_c + self.eps_d
        if abs(total - 1.0) > 1e-12:
            raise InvalidParams(f"eps_b + eps_c + eps_d must be 1, got {total!r}")

    @classmethod
    def from_free(cls, delta: float, eps_b: float, eps_c: float) -> "BoundParams":
        return cls(delta, eps_b, eps_c, 1.0 - eps_b - eps_c)


FALLBACK_PARAMS = BoundParams()


@dataclass(frozen=True)
class StepCoefficients:
    """Right side alpha*y + beta*y^5 + gamma of the scalar bounding ODE for y >= |d_x|^2."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.alpha, self.beta, self.gamma)):
            raise ValueError(f"Non-finite coefficients {self}")
        if self.beta < 0.0 or self.gamma < 0.0:
            raise ValueError(f"beta and gamma must be non-negative, got {self}")

    def rhs(self, y: float) -> float:
        return self.alpha * y + self.beta * y ** 5 + self.gamma


@dataclass(frozen=True)
class PhiNorms:
    """Norms of phi entering the coefficients: |phi_x| (L2) and the l1 bound of phi_xx."""

    phi_x: float
    phi_xx_sup: float

    @classmethod
    def of(cls, phi: FourierField) -> "PhiNorms":
        return cls(phi.sobolev_norm(1), phi.derivative(2).sup_norm_bound())

    def combine(self, other: "PhiNorms") -> "PhiNorms":
        # both norms are convex, so along a linear interpolation the larger endpoint bounds the step
        return PhiNorms(max(self.phi_x, other.phi_x), max(self.phi_xx_sup, other.phi_xx_sup))


@dataclass(frozen=True)
class ErrorBoundState:
    t: float
    y: float
    params: BoundParams = FALLBACK_PARAMS
    blown_up: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(out.pop("params"))
        return out


def step_residual(phi_j: FourierField, phi_next: FourierField, h: float, samples: int = 3,
                  safety: float = 1.0, nonlinear: bool = True) -> float:
    """
    Max over equispaced times in [t_j, t_j + h] of |Res(t)|_{-1} for the linear interpolant,
    Res = phi_t + phi_xxxx + (phi_x^2)_xx. The nonlinear term is kept on bandwidth 2N so
    that the modes dropped by the Galerkin projection are counted.
    """
    if samples < 2:
        raise ValueError(f"Need at least two time samples, got {samples}")
    n = max(phi_j.n_modes, phi_next.n_modes)
    wide = 2 * n if nonlinear else n
    a, b = phi_j.pad(wide), phi_next.pad(wide)
    k = a.wavenumbers.astype(float)
    phi_t = (b.coeffs - a.coeffs) / h
    worst = 0.0
    for theta in np.linspace(0.0, 1.0, samples):
        phi = a.lerp(b, theta)
        res = phi_t + k ** 4 * phi.coeffs
        if nonlinear:
            phi_x = phi.derivative(1)
            res = res - k ** 2 * phi_x.product(phi_x, wide).coeffs
        worst = max(worst, FourierField(res).sobolev_norm(-1))
    return safety * worst


def residual_h_minus1(traj: Trajectory, j: int, samples: int = 3, safety: float = 1.0) -> float:
    if traj.record_every != 1:
        raise ValueError("Residuals need every solver step (record_every = 1)")
    if not 0 <= j < len(traj) - 1:
        raise IndexError(f"Step {j} outside trajectory of {len(traj)} nodes")
    h = traj.times[j + 1] - traj.times[j]
    return step_residual(traj.states[j], traj.states[j + 1], h, samples, safety)


def method1_coefficients(phi_norms: PhiNorms, res: float) -> StepCoefficients:
    return StepCoefficients(
        alpha=18.0 * phi_norms.phi_xx_sup ** 2 - 0.5,
        beta=QUINTIC_WORST_CASE,
        gamma=2.0 * res ** 2,
    )


def method2_coefficients(lambda_tilde: float, phi_norms: PhiNorms, res: float,
                         p: BoundParams) -> StepCoefficients:
    if not isinstance(p, BoundParams):
        raise InvalidParams(f"Expected BoundParams, got {type(p).__name__}")
    d = p.delta
    return StepCoefficients(
        alpha=2.0 * (1.0 - d) * lambda_tilde + 9.0 * d / (2.0 * p.eps_b) * phi_norms.phi_xx_sup ** 2,
        beta=2.0 * 7.0 ** 7 / (4.0 ** 8 * (d * p.eps_c) ** 7),
        gamma=res ** 2 / (2.0 * d * p.eps_d),
    )


def _linear_flow(y: float, rate: float, gamma: float, h: float) -> float:
    x = rate * h
    if x == 0.0:
        return y + gamma * h
    growth = math.expm1(x)
    return y * (growth + 1.0) + gamma * h * (growth / x)


def advance_bound(state: ErrorBoundState, c: StepCoefficients, h: float) -> ErrorBoundState:
    """
    Restarted bound over one step of length h. With a cap Y frozen into the quintic term,
    A = alpha + beta Y^4 and the linear flow y e^{Ah} + gamma (e^{Ah} - 1)/A majorises the true
    ODE while y <= Y; the step is accepted when the result stays below Y, otherwise Y doubles.
    Caps walk the powers of two so the result is monotone in (y, alpha, beta, gamma).
    """
    if state.blown_up:
        return state
    if not h > 0:
        raise ValueError(f"Invalid step: {h}")
    cap = 2.0 * (state.y + c.gamma * h) + CAP_ATOL
    cap = math.ldexp(1.0, math.frexp(cap)[1])
    for _ in range(MAX_CAP_DOUBLINGS + 1):
        try:
            rate = c.alpha + c.beta * cap ** 4
            y_next = _linear_flow(state.y, rate, c.gamma, h)
        except OverflowError:
            break
        if math.isfinite(y_next) and y_next <= cap:
            return replace(state, t=state.t + h, y=y_next)
        cap *= 2.0
    return replace(state, t=state.t + h, y=math.inf, blown_up=True)


def _objective(lambda_tilde: float, phi_norms: PhiNorms, res: float, y: float, p: BoundParams) -> float:
    c = method2_coefficients(lambda_tilde, phi_norms, res, p)
    return c.rhs(y)


def optimize_params(lambda_tilde: float, phi_norms: PhiNorms, res: float, y: float,
                    refine: bool = True) -> BoundParams:
    """
    Approximately minimises alpha(p) y + beta(p) y^5 + gamma(p) over the constraint set
    restricted to PARAM_BOX: a grid over delta in {0.1, .., 0.9} and the eps simplex at
    resolution 1/20, then a bounded Nelder-Mead refinement. Any feasible point keeps the
    bound valid, so the result is simply the best point seen, never worse than the fallback.
    """
    if y < 0:
        raise ValueError(f"Invalid y: {y}")
    if y == 0.0 and res == 0.0:
        return FALLBACK_PARAMS

    # vectorised grid evaluation
    deltas = np.linspace(0.1, 0.9, 9)
    i, j = np.meshgrid(np.arange(1, 20), np.arange(1, 20), indexing="ij")
    keep = i + j <= 19
    eps_b, eps_c = i[keep] / 20.0, j[keep] / 20.0
    eps_d = 1.0 - eps_b - eps_c
    d = deltas[:, None]
    s2 = phi_norms.phi_xx_sup ** 2
    alpha = 2.0 * (1.0 - d) * lambda_tilde + 9.0 * d / (2.0 * eps_b) * s2
    beta = 2.0 * 7.0 ** 7 / (4.0 ** 8 * (d * eps_c) ** 7)
    gamma = res ** 2 / (2.0 * d * eps_d)
    with np.errstate(over="ignore", invalid="ignore"):
        values = alpha * y + beta * y ** 5 + gamma
    values = np.where(np.isfinite(values), values, np.inf)
    di, ei = np.unravel_index(int(np.argmin(values)), values.shape)

    best = FALLBACK_PARAMS
    best_value = _objective(lambda_tilde, phi_norms, res, y, best)
    if values[di, ei] < best_value:
        best = BoundParams.from_free(float(deltas[di]), float(eps_b[ei]), float(eps_c[ei]))
        best_value = _objective(lambda_tilde, phi_norms, res, y, best)

    if refine:
        refined = _refine(lambda_tilde, phi_norms, res, y, best)
        if refined is not None:
            value = _objective(lambda_tilde, phi_norms, res, y, refined)
            if value < best_value:
                best = refined
    return best


def _to_params(z: np.ndarray) -> Optional[BoundParams]:
    lo, hi = PARAM_BOX
    delta, eps_b, eps_c = (float(v) for v in np.clip(z, lo, hi))
    if 1.0 - eps_b - eps_c < lo:
        return None
    return BoundParams.from_free(delta, eps_b, eps_c)


def _refine(lambda_tilde: float, phi_norms: PhiNorms, res: float, y: float,
            start: BoundParams) -> Optional[BoundParams]:
    def f(z: np.ndarray) -> float:
        p = _to_params(z)
        if p is None:
            return math.inf
        try:
            value = _objective(lambda_tilde, phi_norms, res, y, p)
        except (OverflowError, ValueError, ZeroDivisionError):
            return math.inf
        return value

    z0 = np.array([start.delta, start.eps_b, start.eps_c])
    result = minimize(f, z0, method="Nelder-Mead", bounds=[PARAM_BOX] * 3,
                      options={"xatol": 1e-8, "fatol": 1e-14, "maxiter": 400})
    if not np.all(np.isfinite(result.x)):
        return None
    return _to_params(result.x)


def _certified_y(state: ErrorBoundState, c: StepCoefficients, h: float) -> float:
    after = advance_bound(state, c, h)
    return math.inf if after.blown_up else after.y


def select_params(state: ErrorBoundState, lambda_tilde: float, phi_norms: PhiNorms, res: float,
                  h: float, lookahead: int = 1, y_probe: float = 1e-10) -> BoundParams:
    """
    Parameters for the next `lookahead` steps, chosen by certified outcome. The candidates are
    optimize_params at max(y, y_probe), optimize_params at the level the fallback parameters
    reach after lookahead * h, and the fallback itself; the winner gives the smallest bound after
    lookahead * h with its coefficients frozen, ties broken by the bound after one step.
    """
    if lookahead < 1:
        raise ValueError(f"Invalid lookahead: {lookahead}")
    horizon = h * lookahead
    levels = [max(state.y, y_probe)]
    reach = _certified_y(state, method2_coefficients(lambda_tilde, phi_norms, res, FALLBACK_PARAMS), horizon)
    if math.isfinite(reach) and reach > levels[0]:
        levels.append(reach)
    candidates = [optimize_params(lambda_tilde, phi_norms, res, y) for y in levels]
    candidates.append(FALLBACK_PARAMS)

    def outcome(p: BoundParams) -> Tuple[float, float]:
        c = method2_coefficients(lambda_tilde, phi_norms, res, p)
        return _certified_y(state, c, horizon), _certified_y(state, c, h)

    return min(candidates, key=outcome)
