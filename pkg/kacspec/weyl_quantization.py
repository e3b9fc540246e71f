"""
Wigner functions, Weyl matrix elements and symbol/kernel transforms.

Conventions:

    W(f, g)(v, xi) = (1/2pi) int f(v + y/2) conj(g(v - y/2)) e^{-i y xi} dy,
    <a^w f, g>     = int int a(v, xi) W(f, g)(v, xi) dv dxi,
    a(v, xi)       = int k(v, y) e^{-i y xi} dy,   k(v, y) = K(v + y/2, v - y/2).

On a grid with step h in v the difference variable is sampled at y_k = 2 k h,
so v +- y/2 always fall on grid nodes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import special

from kacspec import settings
from kacspec.core_math import (
    GridFunction,
    HermiteCoeffs,
    centred_transform,
    grid_nodes,
    hermite_psi_table,
)
from kacspec.errors import AccuracyError, CapabilityError, DomainError
from kacspec.symbols import RadialSymbol

logger = logging.getLogger(__name__)

MAX_CHECK_INDEX = 40
HEAT_KERNEL_TERMS = 60

SymbolLike = Union[np.ndarray, RadialSymbol, Callable[[np.ndarray, np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class PhaseGrid:
    half_width: float = settings.PHASE_HALF_WIDTH
    points: int = settings.PHASE_POINTS
    xi_half_width: Optional[float] = None

    def __post_init__(self) -> None:
        if self.points < 4 or self.points % 2:
            raise DomainError(f"phase grids need an even number of points, got {self.points}")
        if not self.half_width > 0.0:
            raise DomainError(f"half width must be positive, got {self.half_width}")

    @classmethod
    def for_index(cls, K: int) -> "PhaseGrid":
        """Half-width max(14, 3 sqrt(2K+1)) at the default resolution."""
        half_width = settings.PHASE_HALF_WIDTH
        points = settings.PHASE_POINTS
        if K > 20:
            half_width = max(half_width, 3.0 * math.sqrt(2 * K + 1))
            ratio = half_width / settings.PHASE_HALF_WIDTH
            points = int(2 ** math.ceil(math.log2(points * ratio)))
        return cls(half_width=half_width, points=points)

    @property
    def step_v(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def step_xi(self) -> float:
        return 2.0 * (self.xi_half_width or self.half_width) / self.points

    @property
    def v(self) -> np.ndarray:
        return grid_nodes(self.points, self.step_v)

    @property
    def xi(self) -> np.ndarray:
        return grid_nodes(self.points, self.step_xi)

    def mesh(self):
        return np.meshgrid(self.v, self.xi, indexing="ij")

    def check_aliasing(self) -> None:
        """The xi half-width must stay below pi / (2 h_v), the Nyquist limit for y = 2 k h_v."""
        limit = math.pi / (2.0 * self.step_v)
        if (self.xi_half_width or self.half_width) >= limit:
            raise AccuracyError(
                "xi range aliases on the difference grid",
                {"xi_half_width": self.xi_half_width or self.half_width, "limit": limit},
            )

    def describe(self) -> Dict[str, float]:
        return {
            "half_width": self.half_width,
            "xi_half_width": self.xi_half_width or self.half_width,
            "points": self.points,
        }


def _check_resolution(K: int, grid: PhaseGrid, tol: float = 1e-8) -> None:
    top = hermite_psi_table(K, grid.v)[K]
    defect = grid.step_v * float(top @ top) - 1.0
    if abs(defect) > tol:
        logger.warning("Failed to resolve psi_%d on the phase grid: defect %.3e", K, defect)
        raise AccuracyError(
            f"phase grid cannot resolve psi_{K}",
            {"K": K, "norm_defect": defect, **grid.describe()},
        )


def _phase_values(symbol: SymbolLike, grid: PhaseGrid) -> np.ndarray:
    if isinstance(symbol, np.ndarray):
        if symbol.shape != (grid.points, grid.points):
            raise DomainError(f"sampled symbol has shape {symbol.shape}, grid needs {(grid.points,) * 2}")
        return symbol
    V, XI = grid.mesh()
    if isinstance(symbol, RadialSymbol):
        return symbol.on_phase(V, XI)
    return np.asarray(symbol(V, XI))


def _samples_on(f: Any, grid: PhaseGrid) -> np.ndarray:
    if isinstance(f, HermiteCoeffs):
        return f.evaluate(grid.v)
    if isinstance(f, GridFunction):
        if f.points != grid.points or not math.isclose(f.step, grid.step_v, rel_tol=1e-12):
            raise DomainError("grid function does not live on the phase grid")
        return f.values
    return np.asarray(f(grid.v))


# ─────────────────────────────────────────────────────────
# Wigner functions
# ─────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class WignerGrid:
    values: np.ndarray
    grid: PhaseGrid

    @property
    def mass(self) -> complex:
        return complex(self.grid.step_v * self.grid.step_xi * np.sum(self.values))

    def pair(self, symbol: SymbolLike) -> complex:
        """<a, W> as a Riemann sum on the grid."""
        a = _phase_values(symbol, self.grid)
        return complex(self.grid.step_v * self.grid.step_xi * np.sum(a * self.values))


def _difference_exponentials(grid: PhaseGrid) -> np.ndarray:
    half = grid.points // 2
    y = 2.0 * grid.step_v * np.arange(-half, half + 1)
    return np.exp(-1j * np.outer(y, grid.xi))


def wigner(f: Any, g: Any, grid: Optional[PhaseGrid] = None, tail_tol: float = 1e-9) -> WignerGrid:
    grid = grid or PhaseGrid()
    grid.check_aliasing()
    fv = np.asarray(_samples_on(f, grid), dtype=complex)
    gv = np.conj(np.asarray(_samples_on(g, grid), dtype=complex))
    for values, what in ((fv, "f"), (gv, "g")):
        peak = float(np.max(np.abs(values)))
        if peak > 0.0 and max(abs(values[0]), abs(values[-1])) > tail_tol * peak:
            raise AccuracyError(f"{what} has not decayed at the phase grid edge", grid.describe())

    m = grid.points
    half = m // 2
    idx = np.arange(m)[:, None]
    shifts = np.arange(-half, half + 1)[None, :]
    plus, minus = idx + shifts, idx - shifts
    valid = (plus >= 0) & (plus < m) & (minus >= 0) & (minus < m)
    pairs = np.where(valid, fv[np.clip(plus, 0, m - 1)] * gv[np.clip(minus, 0, m - 1)], 0.0)
    values = (2.0 * grid.step_v / (2.0 * math.pi)) * pairs @ _difference_exponentials(grid)
    return WignerGrid(values=values, grid=grid)


# ─────────────────────────────────────────────────────────
# Matrix elements
# ─────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    matrix: np.ndarray
    symbol_name: str = "symbol"
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def K(self) -> int:
        return int(self.matrix.shape[0] - 1)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix)

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def max_offdiag(self) -> float:
        off = self.matrix - np.diag(self.diagonal)
        return float(np.max(np.abs(off)))

    def max_imag_diagonal(self) -> float:
        return float(np.max(np.abs(self.diagonal.imag)))

    def entries(self) -> List[Tuple[int, int, float, float]]:
        """(i, j, re, im) for every element, row-major."""
        i, j = np.indices(self.matrix.shape)
        return list(
            zip(i.ravel().tolist(), j.ravel().tolist(), self.matrix.real.ravel().tolist(), self.matrix.imag.ravel().tolist())
        )

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(matrix=self.matrix @ other.matrix, symbol_name=f"{self.symbol_name}*{other.symbol_name}")


def weyl_matrix(
    symbol: SymbolLike,
    K: int,
    grid: Optional[PhaseGrid] = None,
    name: str = "symbol",
    s: Optional[float] = None,
) -> OperatorMatrix:
    """
    A_mn = <a^w psi_n, psi_m> for m, n <= K.

    The symbol is first transformed along xi into b(v, y_k); the pairing with
    psi_n(v + y/2) psi_m(v - y/2) is then accumulated one v-row at a time from a
    single table of psi_0..psi_K, so memory stays O(K M).
    """
    if int(K) != K or K < 0:
        raise DomainError(f"K must be a non-negative integer, got {K}")
    grid = grid or PhaseGrid.for_index(K)
    grid.check_aliasing()
    _check_resolution(K, grid)

    a = np.asarray(_phase_values(symbol, grid), dtype=complex)
    h = grid.step_v
    m = grid.points
    half = m // 2
    b = (2.0 * h * grid.step_xi / (2.0 * math.pi)) * (a @ _difference_exponentials(grid).T)
    psi = hermite_psi_table(K, grid.v)

    matrix = np.zeros((K + 1, K + 1), dtype=complex)
    for i in range(m):
        r = min(i, m - 1 - i)
        shifts = np.arange(-r, r + 1)
        matrix += h * (psi[:, i - shifts] * b[i, shifts + half]) @ psi[:, i + shifts].T

    logger.debug("Built %s matrix K=%d on %d points", name, K, m)
    metadata = {"symbol": name, "s": s, "K": int(K), **grid.describe()}
    return OperatorMatrix(matrix=matrix, symbol_name=name, metadata=metadata)


def weyl_matrix_element(symbol: SymbolLike, m: int, n: int, grid: Optional[PhaseGrid] = None) -> complex:
    K = max(int(m), int(n))
    return complex(weyl_matrix(symbol, K, grid).matrix[m, n])


def radial_matrix_diagonal(symbol_of_q: Callable[[np.ndarray], np.ndarray], K: int, nodes: int = 160) -> np.ndarray:
    """
    A_nn = 2 (-1)^n int_0^inf a(q) e^{-2q} L_n(4q) dq for radial symbols.

    With u = 2q this is (-1)^n int_0^inf a(u/2) L_n(2u) e^{-u} du, a
    Gauss-Laguerre integral.
    """
    u, weights = special.roots_laguerre(int(nodes))
    a = np.asarray(symbol_of_q(0.5 * u), dtype=float)
    n = np.arange(int(K) + 1)
    laguerre = special.eval_laguerre(n[:, None], 2.0 * u[None, :])
    return (-1.0) ** n * ((laguerre * a) @ weights)


@dataclass(frozen=True, eq=False)
class DiagonalizationReport:
    symbol_name: str
    K: int
    max_offdiag: float
    diag_deviations: np.ndarray
    hermitian_defect: float
    max_imag: float
    tol: float
    matrix: Optional[OperatorMatrix] = None

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.diag_deviations)))

    @property
    def passed(self) -> bool:
        return self.max_offdiag <= self.tol and self.max_deviation <= self.tol

    def rows(self):
        return [(k, float(dev)) for k, dev in enumerate(self.diag_deviations)]


def diagonalization_check(
    symbol: SymbolLike,
    K: int,
    expected: np.ndarray,
    tol: float = 1e-6,
    grid: Optional[PhaseGrid] = None,
    name: str = "symbol",
    s: Optional[float] = None,
) -> DiagonalizationReport:
    if K > MAX_CHECK_INDEX:
        raise CapabilityError(f"diagonalization checks are limited to K <= {MAX_CHECK_INDEX}")
    expected = np.asarray(expected, dtype=float)
    if expected.size != K + 1:
        raise DomainError(f"expected {K + 1} diagonal values, got {expected.size}")
    op = weyl_matrix(symbol, K, grid, name=name, s=s)
    report = DiagonalizationReport(
        symbol_name=name,
        K=int(K),
        max_offdiag=op.max_offdiag(),
        diag_deviations=op.diagonal.real - expected,
        hermitian_defect=op.hermitian_defect(),
        max_imag=op.max_imag_diagonal(),
        tol=float(tol),
        matrix=op,
    )
    logger.info(
        "Diagonalization of %s K=%d: offdiag %.3e, deviation %.3e", name, K, report.max_offdiag, report.max_deviation
    )
    return report


# ─────────────────────────────────────────────────────────
# Kernels
# ─────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class KernelGrid:
    """k(v_i, y_k) on centred grids in the centre and difference variables."""

    values: np.ndarray
    v_step: float
    y_step: float

    @property
    def v(self) -> np.ndarray:
        return grid_nodes(self.values.shape[0], self.v_step)

    @property
    def y(self) -> np.ndarray:
        return grid_nodes(self.values.shape[1], self.y_step)

    @classmethod
    def identity(cls, points: int, v_step: float, y_step: float) -> "KernelGrid":
        values = np.zeros((points, points))
        values[:, points // 2] = 1.0 / y_step
        return cls(values=values, v_step=v_step, y_step=y_step)


@dataclass(frozen=True, eq=False)
class SymbolSamples:
    """a(v_i, xi_k); the xi grid is conjugate to the kernel's y grid."""

    values: np.ndarray
    v_step: float
    xi_step: float

    @property
    def v(self) -> np.ndarray:
        return grid_nodes(self.values.shape[0], self.v_step)

    @property
    def xi(self) -> np.ndarray:
        return grid_nodes(self.values.shape[1], self.xi_step)


def _check_y_tail(values: np.ndarray, what: str, tail_tol: float) -> None:
    if not settings.TAIL_CHECKS:
        return
    peak = float(np.max(np.abs(values)))
    edge = float(max(np.max(np.abs(values[:, 0])), np.max(np.abs(values[:, -1]))))
    if peak > 0.0 and edge > tail_tol * peak:
        logger.warning("Failed tail check for %s: edge/peak = %.3e", what, edge / peak)
        raise AccuracyError(f"{what} has not decayed in the difference variable", {"relative": edge / peak})


def symbol_from_kernel(kernel: KernelGrid, tail_tol: float = 1e-9) -> SymbolSamples:
    _check_y_tail(kernel.values, "kernel", tail_tol)
    values, xi_step = centred_transform(kernel.values, kernel.y_step, axis=1)
    return SymbolSamples(values=values, v_step=kernel.v_step, xi_step=xi_step)


def kernel_from_symbol(symbol: SymbolSamples, tail_tol: float = 1e-9) -> KernelGrid:
    values, y_step = centred_transform(symbol.values, symbol.xi_step, axis=1, inverse=True)
    _check_y_tail(values, "kernel", tail_tol)
    return KernelGrid(values=values, v_step=symbol.v_step, y_step=y_step)


def even_kernel(kernel: KernelGrid) -> KernelGrid:
    """(k(v, y) + k(v, -y)) / 2; reflection is the index map k -> (n - k) mod n."""
    reflected = np.roll(kernel.values[:, ::-1], 1, axis=1)
    return KernelGrid(values=0.5 * (kernel.values + reflected), v_step=kernel.v_step, y_step=kernel.y_step)


def heat_kernel(t: float, points: int = 256, v_step: float = 0.1, y_step: float = 0.1, terms: int = HEAT_KERNEL_TERMS) -> KernelGrid:
    """sum_{n <= terms} e^{-t(n + 1/2)} psi_n(v + y/2) psi_n(v - y/2)."""
    if t <= 0.0:
        raise DomainError(f"heat kernel time must be positive, got {t}")
    v = grid_nodes(points, v_step)[:, None]
    y = grid_nodes(points, y_step)[None, :]
    left = hermite_psi_table(terms, v + 0.5 * y)
    right = hermite_psi_table(terms, v - 0.5 * y)
    weights = np.exp(-t * (np.arange(terms + 1) + 0.5))
    values = np.tensordot(weights, left * right, axes=(0, 0))
    return KernelGrid(values=values, v_step=v_step, y_step=y_step)
