import math
import typing
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np


SQRT_2PI: float = math.sqrt(2.0 * math.pi)


def _full_spectrum(coeffs: np.ndarray) -> np.ndarray:
    return np.concatenate([np.conj(coeffs[::-1]), [0.0], coeffs])


def convolve_coeffs(a: np.ndarray, b: np.ndarray, out_modes: int) -> np.ndarray:
    """
    Amplitudes k = 1..out_modes of the product of the real fields with amplitudes a and b.
    Works on raw arrays, so the result may hold inf or nan when the inputs are huge.
    """
    # e_s * e_l = e_{s+l} / sqrt(2*pi)
    conv = np.convolve(_full_spectrum(a), _full_spectrum(b)) / SQRT_2PI
    centre = a.size + b.size
    kept = conv[centre + 1:centre + 1 + out_modes]
    out = np.zeros(out_modes, dtype=np.complex128)
    out[:kept.size] = kept
    return out


@dataclass(frozen=True, eq=False)
class FourierField:
    """
    A real, mean-zero, 2*pi-periodic function stored as truncated Fourier coefficients
    with respect to the orthonormal basis e_k(x) = exp(ikx) / sqrt(2*pi).

    Only the amplitudes a_1..a_n are stored; a_{-k} = conj(a_k) is implied and a_0 = 0.

    Constants
    ---------
        SOBOLEV_ORDERS: the Sobolev indices accepted by sobolev_norm.

    Attributes
    ----------
        coeffs (np.ndarray): complex amplitudes a_k for k = 1..n (read-only).

    Methods
    -------
    zeros(n)
        the zero field with n modes
    from_terms(terms, n)
        builds a field from (amplitude, 'sin'|'cos', wavenumber) triples
    from_grid(values, n)
        projects equispaced samples on [0, 2*pi) to the first n modes
    evaluate(x)
        point values of the field
    derivative(order)
        coefficient-wise multiplication by (ik)^order
    l2_norm()
        L2 norm over [0, 2*pi] (Parseval)
    sobolev_norm(s)
        sqrt(sum k^(2s) |a_k|^2) over all k != 0, for s in -1..3
    sup_norm_bound()
        l1 coefficient bound, a guaranteed upper bound on the sup norm
    product(other, out_modes)
        exact convolution of the coefficient sequences, projected to mean zero
    """

    SOBOLEV_ORDERS: typing.ClassVar[Tuple[int, ...]] = (-1, 0, 1, 2, 3)

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=np.complex128).reshape(-1)
        if arr.size < 1:
            raise ValueError("FourierField needs at least one mode")
        if not np.all(np.isfinite(arr)):
            raise ValueError("FourierField coefficients must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def n_modes(self) -> int:
        return int(self.coeffs.size)

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(1, self.n_modes + 1)

    @classmethod
    def zeros(cls, n_modes: int) -> "FourierField":
        return cls(np.zeros(n_modes, dtype=np.complex128))

    @classmethod
    def from_terms(cls, terms: Iterable[Tuple[float, str, int]], n_modes: int) -> "FourierField":
        coeffs = np.zeros(n_modes, dtype=np.complex128)
        for amplitude, kind, k in terms:
            if k < 1:
                raise ValueError(f"Invalid wavenumber {k}: constant modes are not mean-zero")
            if k > n_modes:
                raise ValueError(f"Wavenumber {k} does not fit into {n_modes} modes")
            # sin(kx) = (e^{ikx} - e^{-ikx}) / 2i, cos(kx) = (e^{ikx} + e^{-ikx}) / 2
            if kind == "sin":
                coeffs[k - 1] += amplitude * SQRT_2PI / 2j
            elif kind == "cos":
                coeffs[k - 1] += amplitude * SQRT_2PI / 2
            else:
                raise ValueError(f"Invalid term kind: '{kind}'")
        return cls(coeffs)

    @classmethod
    def from_grid(cls, values: np.ndarray, n_modes: int) -> "FourierField":
        values = np.asarray(values, dtype=float)
        m = values.size
        if n_modes > (m - 1) // 2:
            raise ValueError(f"{m} grid points cannot resolve {n_modes} modes")
        spectrum = np.fft.rfft(values)
        return cls(spectrum[1:n_modes + 1] * SQRT_2PI / m)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        phases = np.exp(1j * np.multiply.outer(x, self.wavenumbers))
        return 2.0 * np.real(phases @ self.coeffs) / SQRT_2PI

    def pad(self, n_modes: int) -> "FourierField":
        if n_modes < self.n_modes:
            raise ValueError(f"Cannot pad a field with {self.n_modes} modes down to {n_modes}")
        if n_modes == self.n_modes:
            return self
        return FourierField(np.concatenate([self.coeffs, np.zeros(n_modes - self.n_modes)]))

    def _aligned(self, other: "FourierField") -> Tuple[np.ndarray, np.ndarray]:
        n = max(self.n_modes, other.n_modes)
        return self.pad(n).coeffs, other.pad(n).coeffs

    def __add__(self, other: "FourierField") -> "FourierField":
        a, b = self._aligned(other)
        return FourierField(a + b)

    def __sub__(self, other: "FourierField") -> "FourierField":
        a, b = self._aligned(other)
        return FourierField(a - b)

    def __mul__(self, scalar: float) -> "FourierField":
        return FourierField(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def lerp(self, other: "FourierField", theta: float) -> "FourierField":
        a, b = self._aligned(other)
        return FourierField((1.0 - theta) * a + theta * b)

    def derivative(self, order: int = 1) -> "FourierField":
        if order < 0:
            raise ValueError(f"Invalid derivative order: {order}")
        if order == 0:
            return self
        # one multiplication per order: derivative(1) twice equals derivative(2) bit for bit
        factor = 1j * self.wavenumbers
        out = self.coeffs
        for _ in range(order):
            out = out * factor
        return FourierField(out)

    def l2_norm(self) -> float:
        return math.sqrt(2.0 * float(np.sum(np.abs(self.coeffs) ** 2)))

    def sobolev_norm(self, s: int) -> float:
        if s not in self.SOBOLEV_ORDERS:
            raise ValueError(f"Invalid Sobolev order {s}, expected one of {self.SOBOLEV_ORDERS}")
        weights = self.wavenumbers.astype(float) ** (2 * s)
        return math.sqrt(2.0 * float(np.sum(weights * np.abs(self.coeffs) ** 2)))

    def sup_norm_bound(self) -> float:
        return 2.0 * float(np.sum(np.abs(self.coeffs))) / SQRT_2PI

    def full_spectrum(self) -> np.ndarray:
        """Coefficients for k = -n..n (index k + n), including the zero mean entry."""
        return _full_spectrum(self.coeffs)

    def product(self, other: "FourierField", out_modes: int) -> "FourierField":
        return FourierField(convolve_coeffs(self.coeffs, other.coeffs, out_modes))

    def __repr__(self) -> str:
        return f"FourierField(n_modes={self.n_modes}, l2={self.l2_norm():.6g})"
