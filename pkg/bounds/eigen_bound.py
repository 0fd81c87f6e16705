import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, eigh

from classes.errors import Infeasible, NoConvergence
from classes.fourier_field import SQRT_2PI, FourierField

RESIDUAL_TOL: float = 1e-8
# backward-error allowance relative to the matrix 1-norm, which grows like n^4
BACKWARD_TOL: float = 1e-13


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """
    Symmetrised Galerkin projection 1/2 (P_n A P_n + (P_n A P_n)^*) of
    A_phi u = -u_xxxx - 2 (phi_x u)_xxx in the real orthonormal basis
    cos(x)/sqrt(pi), .., cos(nx)/sqrt(pi), sin(x)/sqrt(pi), .., sin(nx)/sqrt(pi).
    """

    n: int
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return 2 * self.n

    def restrict(self, m: int) -> "OperatorMatrix":
        """The block acting on H_m, m <= n."""
        if not 1 <= m <= self.n:
            raise ValueError(f"Cannot restrict a {self.n}-mode operator to {m} modes")
        idx = np.concatenate([np.arange(m), self.n + np.arange(m)])
        return OperatorMatrix(m, self.entries[np.ix_(idx, idx)])

    @staticmethod
    def coordinates(u: FourierField, n: int) -> np.ndarray:
        """Real-basis coordinates of u in H_n: x_k = sqrt(2) Re a_k, y_k = -sqrt(2) Im a_k."""
        a = u.pad(max(n, u.n_modes)).coeffs[:n]
        return math.sqrt(2.0) * np.concatenate([a.real, -a.imag])

    def quadratic_form(self, u: FourierField) -> float:
        x = self.coordinates(u, self.n)
        return float(x @ self.entries @ x)


@dataclass(frozen=True)
class EigenBoundReport:
    n: int
    lambda_n: float
    c_phi: float
    eta_n: float
    correction: Optional[float]
    lambda_rigorous: Optional[float]
    worst_case: float
    n_min: float
    modes_needed: float
    feasible: bool

    def to_dict(self) -> dict:
        return asdict(self)


def assemble(phi: FourierField, n: int) -> OperatorMatrix:
    if n < 1:
        raise ValueError(f"Invalid number of modes: {n}")
    ks = np.arange(1, n + 1)
    # psi: coefficients of phi_x for k = -2n..2n (index k + 2n), zero beyond phi's bandwidth
    psi_x = phi.derivative(1).coeffs
    m = min(phi.n_modes, 2 * n)
    psi = np.zeros(4 * n + 1, dtype=np.complex128)
    psi[2 * n + 1:2 * n + 1 + m] = psi_x[:m]
    psi[2 * n - m:2 * n] = np.conj(psi_x[:m][::-1])

    def block(rows: np.ndarray, cols: np.ndarray, diagonal: bool) -> np.ndarray:
        # complex matrix entries M_kl = -k^4 delta_kl - 2 (ik)^3 psi_{k-l} / sqrt(2 pi)
        diff = rows[:, None] - cols[None, :]
        out = 2j * rows[:, None].astype(float) ** 3 * psi[diff + 2 * n] / SQRT_2PI
        if diagonal:
            out[np.diag_indices(n)] -= rows.astype(float) ** 4
        return out

    # ++, +-, -+, -- blocks with the negative index -k aligned to k
    pp, pn = block(ks, ks, True), block(ks, -ks, False)
    np_, nn = block(-ks, ks, False), block(-ks, -ks, True)
    cc = 0.5 * (pp + pn + np_ + nn)
    cs = 0.5j * (-pp + pn - np_ + nn)
    sc = 0.5j * (pp + pn - np_ - nn)
    ss = 0.5 * (pp - pn - np_ + nn)
    raw = np.block([[cc, cs], [sc, ss]]).real
    entries = 0.5 * (raw + raw.T)
    if not np.all(np.isfinite(entries)):
        raise ValueError("Operator matrix has non-finite entries")
    return OperatorMatrix(n, entries)


def lambda_n(matrix: OperatorMatrix) -> float:
    """Largest eigenvalue, checked against its residual certificate and the Gershgorin bound."""
    a = matrix.entries
    top = matrix.dim - 1
    try:
        values, vectors = eigh(a, subset_by_index=[top, top])
    except LinAlgError as e:
        raise NoConvergence(f"Symmetric eigensolver failed for n = {matrix.n}: {e}") from e
    lam = float(values[0])
    v = vectors[:, 0]
    residual = float(np.linalg.norm(a @ v - lam * v))
    slack = BACKWARD_TOL * float(np.linalg.norm(a, 1))
    if residual > RESIDUAL_TOL * max(1.0, abs(lam)) + slack:
        raise NoConvergence(f"Eigenpair residual {residual:.3e} too large for lambda = {lam:.6g}")
    gershgorin = float(np.max(np.diag(a) + np.sum(np.abs(a), axis=1) - np.abs(np.diag(a))))
    if lam > gershgorin + 1e-12 * max(1.0, abs(gershgorin)) + slack:
        raise NoConvergence(f"lambda = {lam:.6g} exceeds the Gershgorin bound {gershgorin:.6g}")
    return lam


def c_phi(phi: FourierField) -> float:
    return (2.0 * phi.derivative(3).sup_norm_bound()
            + 6.0 * phi.derivative(2).sup_norm_bound()
            + 4.0 * phi.derivative(1).sup_norm_bound())


def worst_case_bound(phi: FourierField) -> float:
    return -0.5 + 4.5 * phi.derivative(2).sup_norm_bound() ** 2


def rigorous_bound(phi: FourierField, n: int, strict: bool = False) -> EigenBoundReport:
    """
    lambda <= lambda_n + 1/2 max{eta_n (9 s^2 - 2 lambda_n), 9 s^2 + |2 lambda_n| - n^4 / 2}
    with s the l1 bound of phi_xx and eta_n = 2 C_phi^2 / n^2, valid for n >= sqrt(2) C_phi.

    The second branch uses |2 lambda_n| so that it bounds both sign readings of that term.
    If n is too small, the report has feasible=False and no rigorous value; with strict=True
    Infeasible is raised instead.
    """
    c = c_phi(phi)
    n_min = math.sqrt(2.0) * c
    feasible = n >= n_min
    if strict and not feasible:
        raise Infeasible(n, n_min)
    s = phi.derivative(2).sup_norm_bound()
    lam = lambda_n(assemble(phi, n))
    eta = 2.0 * c ** 2 / n ** 2
    correction, rigorous = None, None
    if feasible:
        low = eta * (9.0 * s ** 2 - 2.0 * lam)
        high = 9.0 * s ** 2 + abs(2.0 * lam) - 0.5 * n ** 4
        correction = 0.5 * max(low, high)
        rigorous = lam + max(0.0, correction)
    return EigenBoundReport(
        n=n,
        lambda_n=lam,
        c_phi=c,
        eta_n=eta,
        correction=correction,
        lambda_rigorous=rigorous,
        worst_case=-0.5 + 4.5 * s ** 2,
        n_min=n_min,
        modes_needed=2.0 * n_min + 1.0,
        feasible=feasible,
    )
