import math
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from classes.errors import NonFinite
from classes.fourier_field import FourierField, convolve_coeffs
from classes.trajectory import Trajectory
from run_logging import log


@dataclass(frozen=True)
class SolverConfig:
    """
    Galerkin truncation and time grid of the semi-implicit Euler scheme.

    Attributes
    ----------
        n_modes (int): truncation order N (modes k = 1..N)
        dt (float): step h
        t_end (float): final time
        record_every (int): store every record_every-th state (the final state is always stored)
    """

    n_modes: int
    dt: float
    t_end: float
    record_every: int = 1

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError(f"Invalid n_modes: {self.n_modes}")
        if not self.dt > 0:
            raise ValueError(f"Invalid dt: {self.dt}")
        if not self.t_end >= self.dt:
            raise ValueError(f"t_end = {self.t_end} must be at least dt = {self.dt}")
        if self.record_every < 1:
            raise ValueError(f"Invalid record_every: {self.record_every}")

    @property
    def n_steps(self) -> int:
        # tolerate t_end / dt landing a rounding error above an integer
        return int(math.ceil(self.t_end / self.dt - 1e-9))


def _squared_slope(coeffs: np.ndarray, out_modes: int) -> np.ndarray:
    a_x = coeffs * (1j * np.arange(1, coeffs.size + 1))
    return convolve_coeffs(a_x, a_x, out_modes)


def nonlinearity(a: FourierField, out_modes: int = 0) -> FourierField:
    """b = (a_x)^2 projected to mean zero, computed exactly and truncated to out_modes (default: a's)."""
    return FourierField(_squared_slope(a.coeffs, out_modes or a.n_modes))


def step(a: FourierField, h: float, nonlinear: bool = True) -> FourierField:
    """One semi-implicit Euler step: a+_k = (a_k + h k^2 b_k) / (1 + h k^4)."""
    k = a.wavenumbers.astype(float)
    with np.errstate(over="ignore", invalid="ignore"):
        rhs = a.coeffs
        if nonlinear:
            rhs = rhs + h * k ** 2 * _squared_slope(a.coeffs, a.n_modes)
        out = rhs / (1.0 + h * k ** 4)
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"Approximation left the finite range (h = {h})")
    return FourierField(out)


def rescale(field: FourierField, k: int) -> FourierField:
    """u(x) -> u(kx): mode m moves to mode k*m."""
    out = np.zeros(field.n_modes * k, dtype=np.complex128)
    out[k - 1::k] = field.coeffs
    return FourierField(out)


def iterate(u0: FourierField, cfg: SolverConfig, nonlinear: bool = True) -> Iterator[Tuple[float, FourierField]]:
    """Yields (t_j, phi_j) for j = 0..n_steps, starting with the zero-padded initial datum."""
    if u0.n_modes > cfg.n_modes:
        raise ValueError(f"Initial datum has {u0.n_modes} modes, solver bandwidth is {cfg.n_modes}")
    state = u0.pad(cfg.n_modes)
    yield 0.0, state
    for j in range(1, cfg.n_steps + 1):
        state = step(state, cfg.dt, nonlinear)
        yield j * cfg.dt, state


def integrate(u0: FourierField, cfg: SolverConfig, verbosity: int = 0, log_queue=None,
              nonlinear: bool = True) -> Trajectory:
    log(log_queue, verbosity, "INFO",
        f"Integrating N={cfg.n_modes}, h={cfg.dt:g}, t_end={cfg.t_end:g} ({cfg.n_steps} steps)")
    times, states = [], []
    last = cfg.n_steps
    for j, (t, state) in enumerate(iterate(u0, cfg, nonlinear)):
        if j % cfg.record_every == 0 or j == last:
            times.append(t)
            states.append(state)
            log(log_queue, verbosity, "DEBUG", f"t={t:.6g} |phi_x|={state.sobolev_norm(1):.6g}")
    log(log_queue, verbosity, "INFO", f"Stored {len(states)} states")
    return Trajectory(np.array(times), states, cfg.dt, cfg.record_every)
