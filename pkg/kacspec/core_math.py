"""
Special functions, the scaled Hermite basis and the shared Fourier convention.

Hermite functions are normalized for the oscillator H = -d^2/dx^2 + x^2/4:

    psi_n(x) = 2^{-1/4} phi_n(x / sqrt(2)),   H psi_n = (n + 1/2) psi_n,

so that psi_0 = (2 pi)^{-1/4} e^{-x^2/4} is the square root of the Maxwellian.
Fourier transforms use f_hat(xi) = int f(v) e^{-i v xi} dv with no prefactor;
the inverse carries 1/(2 pi).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy import special

from kacspec import settings
from kacspec.errors import AccuracyError, CapabilityError, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SQRT_4PI = math.sqrt(4.0 * math.pi)
_PSI0_LOG_NORM = -0.25 * math.log(2.0 * math.pi)
_RESCALE = 1e150


def gamma(x: float) -> float:
    """Euler gamma on the positive axis."""
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"gamma is only defined here for x > 0, got {x}")
    return float(special.gamma(x))


def _check_index(n: int) -> int:
    if int(n) != n or n < 0:
        raise DomainError(f"Hermite index must be a non-negative integer, got {n}")
    n = int(n)
    if n > settings.HERMITE_MAX_INDEX:
        raise CapabilityError(
            f"Hermite index {n} exceeds the stability limit {settings.HERMITE_MAX_INDEX}"
        )
    return n


def hermite_psi_table(max_index: int, x: ArrayLike) -> np.ndarray:
    """
    psi_0..psi_N at the points x, shape (N + 1,) + x.shape.

    Forward three-term recurrence psi_n = (x psi_{n-1} - sqrt(n-1) psi_{n-2}) / sqrt(n)
    run on the polynomial factor with a per-point log scale, so large |x| and n
    neither overflow nor underflow before the Gaussian is applied.
    """
    n_max = _check_index(max_index)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("Hermite functions need finite arguments")

    table = np.empty((n_max + 1,) + x.shape)
    log_scale = -0.25 * x * x + _PSI0_LOG_NORM
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for n in range(n_max + 1):
            if n == 1:
                prev, cur = cur, x * cur
            elif n > 1:
                prev, cur = cur, (x * cur - math.sqrt(n - 1) * prev) / math.sqrt(n)
            big = np.abs(cur) > _RESCALE
            if np.any(big):
                factor = np.where(big, np.abs(cur), 1.0)
                cur = cur / factor
                prev = prev / factor
                log_scale = log_scale + np.log(factor)
            table[n] = np.sign(cur) * np.exp(np.log(np.abs(cur)) + log_scale)
    return table


def hermite_psi(n: int, x: ArrayLike) -> ArrayLike:
    values = hermite_psi_table(n, x)[n]
    return float(values) if values.ndim == 0 else values


def hermite_psi_hat(n: int, xi: ArrayLike) -> ArrayLike:
    """Closed-form Fourier image: sqrt(4 pi) (-i)^n psi_n(2 xi)."""
    return SQRT_4PI * (-1j) ** (n % 4) * hermite_psi(n, 2.0 * np.asarray(xi, dtype=float))


@lru_cache(maxsize=None)
def creation_polynomial(n: int) -> Polynomial:
    """p_n with psi_n = p_n psi_0, from the ladder a_+ = x/2 - d/dx."""
    n = _check_index(n)
    if n == 0:
        return Polynomial([1.0])
    previous = creation_polynomial(n - 1)
    return (Polynomial([0.0, 1.0]) * previous - previous.deriv()) / math.sqrt(n)


def maxwellian(v: ArrayLike, d: int = 1) -> ArrayLike:
    v = np.asarray(v, dtype=float)
    return (2.0 * math.pi) ** (-0.5 * d) * np.exp(-0.5 * v * v)


def maxwellian_hat(xi: ArrayLike) -> ArrayLike:
    xi = np.asarray(xi, dtype=float)
    return np.exp(-0.5 * xi * xi)


# ─────────────────────────────────────────────────────────
# Grid functions
# ─────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class GridFunction:
    """
    Samples on the FFT-centred grid x_j = step * (j - n/2), n even.

    The grid is symmetric under the periodic index map j -> (n - j) mod n,
    which is how parity is applied.
    """

    values: np.ndarray
    step: float

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.ndim != 1 or values.size < 2 or values.size % 2:
            raise DomainError("grid functions need an even number of samples")
        if not self.step > 0.0:
            raise DomainError(f"grid step must be positive, got {self.step}")
        object.__setattr__(self, "values", values)

    @property
    def points(self) -> int:
        return int(self.values.size)

    @property
    def half_width(self) -> float:
        return 0.5 * self.points * self.step

    @property
    def nodes(self) -> np.ndarray:
        return grid_nodes(self.points, self.step)

    @classmethod
    def sample(
        cls, func: Callable[[np.ndarray], np.ndarray], half_width: float, points: int
    ) -> "GridFunction":
        step = 2.0 * float(half_width) / int(points)
        nodes = grid_nodes(int(points), step)
        return cls(values=np.asarray(func(nodes)), step=step)

    def reflect(self) -> np.ndarray:
        """Samples of x -> f(-x)."""
        return np.roll(self.values[::-1], 1)

    def even_part(self) -> "GridFunction":
        return GridFunction(values=0.5 * (self.values + self.reflect()), step=self.step)

    def norm_squared(self) -> float:
        return float(self.step * np.sum(np.abs(self.values) ** 2))


def grid_nodes(points: int, step: float) -> np.ndarray:
    return step * (np.arange(points) - points // 2)


def _check_tail(values: np.ndarray, what: str, tail_tol: float) -> None:
    if not settings.TAIL_CHECKS:
        return
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    if peak == 0.0:
        return
    edge = float(max(np.abs(values[0]), np.abs(values[-1])))
    if edge > tail_tol * peak:
        logger.warning("Failed tail check for %s: edge/peak = %.3e", what, edge / peak)
        raise AccuracyError(
            f"{what} has not decayed at the grid edge",
            {"edge": edge, "peak": peak, "relative": edge / peak, "tail_tol": tail_tol},
        )


def _alternating(n: int, axis: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = n
    return (1.0 - 2.0 * (np.arange(n) % 2)).reshape(shape)


def centred_transform(values: np.ndarray, step: float, axis: int = -1, inverse: bool = False):
    """
    Centred DFT along one axis of an array sampled on an FFT-centred grid.

    Forward: step * sum_j f_j e^{-i x_j xi_k}.  Inverse: (step / 2 pi) sum_k F_k e^{i x_j xi_k}.
    The phase factors (-1)^j, (-1)^k and (-1)^{n/2} move the origin of both
    grids to the centre.  Returns the transformed array and the conjugate step.
    """
    values = np.asarray(values, dtype=complex)
    axis = axis % values.ndim
    n = values.shape[axis]
    signs = _alternating(n, axis, values.ndim)
    if inverse:
        out = (step / (2.0 * math.pi)) * n * signs * np.fft.ifft(signs * values, axis=axis)
    else:
        out = step * signs * np.fft.fft(signs * values, axis=axis)
    if (n // 2) % 2:
        out = -out
    return out, 2.0 * math.pi / (n * step)


def fourier_grid(f: GridFunction, oversample: int = 1, tail_tol: float = 1e-9) -> GridFunction:
    """
    f_hat(xi_k) = step * sum_j f_j e^{-i x_j xi_k} on the conjugate grid.

    With n' = n * oversample (zero padding), xi_k = eta (k - n'/2) and
    eta = 2 pi / (n' step).
    """
    if int(oversample) < 1:
        raise DomainError(f"oversample must be >= 1, got {oversample}")
    _check_tail(f.values, "input samples", tail_tol)

    n = f.points * int(oversample)
    pad = (n - f.points) // 2
    spectrum, eta = centred_transform(np.pad(f.values, (pad, pad)), f.step)

    _check_tail(spectrum, "Fourier transform (aliasing)", tail_tol)
    return GridFunction(values=spectrum, step=eta)


def inverse_fourier_grid(f_hat: GridFunction) -> GridFunction:
    """f(x_j) = (1 / 2 pi) sum_k eta F_k e^{i x_j xi_k}; exact inverse of `fourier_grid`."""
    values, step = centred_transform(f_hat.values, f_hat.step, inverse=True)
    return GridFunction(values=values, step=step)


# ─────────────────────────────────────────────────────────
# Hermite expansions
# ─────────────────────────────────────────────────────────

@dataclass(frozen=True)
class HermiteBasis:
    max_index: int = settings.DEFAULT_BASIS_INDEX

    def __post_init__(self) -> None:
        _check_index(self.max_index)

    def table(self, x: ArrayLike) -> np.ndarray:
        return hermite_psi_table(self.max_index, x)

    def gram_defect(self, grid: GridFunction) -> float:
        """max |G - I| of the trapezoidal Gram matrix on the grid."""
        table = self.table(grid.nodes)
        gram = grid.step * table @ table.T
        return float(np.max(np.abs(gram - np.eye(self.max_index + 1))))


@dataclass(frozen=True, eq=False)
class HermiteCoeffs:
    coeffs: np.ndarray
    basis: HermiteBasis = field(default_factory=HermiteBasis)

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs)
        if coeffs.ndim != 1 or coeffs.size != self.basis.max_index + 1:
            raise DomainError(
                f"expected {self.basis.max_index + 1} coefficients, got shape {coeffs.shape}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def unit(cls, k: int, max_index: int) -> "HermiteCoeffs":
        coeffs = np.zeros(max_index + 1)
        coeffs[k] = 1.0
        return cls(coeffs=coeffs, basis=HermiteBasis(max_index))

    @property
    def max_index(self) -> int:
        return self.basis.max_index

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def evaluate(self, x: ArrayLike) -> np.ndarray:
        return np.tensordot(self.coeffs, self.basis.table(x), axes=(0, 0))


def hermite_transform(
    f: GridFunction, basis: Optional[HermiteBasis] = None, tol: float = 1e-8
) -> HermiteCoeffs:
    """Project grid samples onto psi_0..psi_N (trapezoidal rule)."""
    basis = basis or HermiteBasis()
    table = basis.table(f.nodes)
    top_norm = f.step * float(np.sum(table[-1] ** 2))
    if abs(top_norm - 1.0) > tol:
        logger.warning(
            "Failed to resolve psi_%d on the grid: norm defect %.3e", basis.max_index, top_norm - 1.0
        )
        raise AccuracyError(
            f"grid cannot resolve psi_{basis.max_index}",
            {
                "max_index": basis.max_index,
                "half_width": f.half_width,
                "step": f.step,
                "norm_defect": top_norm - 1.0,
            },
        )
    coeffs = f.step * (table @ f.values)
    return HermiteCoeffs(coeffs=coeffs, basis=basis)


def inverse_hermite_transform(c: HermiteCoeffs, half_width: float, points: int) -> GridFunction:
    step = 2.0 * float(half_width) / int(points)
    nodes = grid_nodes(int(points), step)
    return GridFunction(values=c.evaluate(nodes), step=step)
