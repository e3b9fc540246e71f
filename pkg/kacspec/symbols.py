"""
Weyl symbols of the linearized operator and of the oscillator semigroup.

All symbols here are radial: they depend on (v, xi) only through
q = |xi|^2 + |v|^2/4, or lambda = 1 + q.  The workhorses therefore act on
arrays of q and integrate whole tables in one quadrature sweep.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from kacspec import settings
from kacspec.errors import ConsistencyError, DomainError, check_s
from kacspec.singular_quadrature import AngularTest, fp_integrate, singular_moment
from kacspec.spectrum import T_MAX, c0, d0, lambda_doubleprime

logger = logging.getLogger(__name__)

# Dyadic lambda grid of the fitted route: 100 * 2^i up to 1e6
FIT_LAMBDAS = 100.0 * 2.0 ** np.arange(14)
FIT_GATES = {1: 0.01, 2: 0.05}
MAX_ORDER = 6
PROJECTION_TERMS = 80
SMALL_Q = 15.0


def _check_d(d: int) -> int:
    if int(d) != d or d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d}")
    return int(d)


def _as_q(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if np.any(q < 0.0) or not np.all(np.isfinite(q)):
        raise DomainError("q = |xi|^2 + |v|^2/4 must be finite and non-negative")
    return q


def _scalar_or_array(values: np.ndarray):
    return float(values) if np.ndim(values) == 0 else values


@dataclass(frozen=True, eq=False)
class PhasePoint:
    v: np.ndarray
    xi: np.ndarray

    def __post_init__(self) -> None:
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if v.shape != xi.shape or v.ndim != 1:
            raise DomainError("v and xi must be vectors of the same dimension")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "xi", xi)

    @classmethod
    def origin(cls, d: int = 1) -> "PhasePoint":
        return cls(v=np.zeros(d), xi=np.zeros(d))

    @property
    def d(self) -> int:
        return int(self.v.size)

    @property
    def q(self) -> float:
        return float(self.xi @ self.xi + 0.25 * (self.v @ self.v))

    @property
    def lam(self) -> float:
        return 1.0 + self.q


def phase_q(v, xi) -> np.ndarray:
    """q on arrays of one-dimensional (v, xi)."""
    v = np.asarray(v, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return xi * xi + 0.25 * v * v


# ─────────────────────────────────────────────────────────
# Oscillator symbols
# ─────────────────────────────────────────────────────────

def mehler_symbol(t: float, p: PhasePoint, d: Optional[int] = None) -> float:
    d = p.d if d is None else _check_d(d)
    return float(mehler_of_q(t, p.q, d))


def mehler_of_q(t: float, q, d: int = 1):
    t = float(t)
    if t < 0.0:
        raise DomainError(f"Mehler time must be >= 0, got {t}")
    q = _as_q(q)
    values = np.exp(-2.0 * math.tanh(0.5 * t) * q) / math.cosh(0.5 * t) ** _check_d(d)
    return _scalar_or_array(values)


def projection_symbol(k: int, q, d: int = 1):
    """Weyl symbol 2^d (-1)^k e^{-2q} L_k^{(d-1)}(4q) of the k-th oscillator projection."""
    if int(k) != k or k < 0:
        raise DomainError(f"projection index must be >= 0, got {k}")
    d = _check_d(d)
    q = _as_q(q)
    values = 2.0 ** d * (-1.0) ** k * np.exp(-2.0 * q) * special.eval_genlaguerre(int(k), d - 1.0, 4.0 * q)
    return _scalar_or_array(values)


# ─────────────────────────────────────────────────────────
# l1 and l2 on q-tables
# ─────────────────────────────────────────────────────────

def l1_of_q(q, s: float, d: int = 1, tol: Optional[float] = None, relative: bool = False):
    """
    int beta(theta) [1 - sec^{2d}(theta/2) exp(-2 tan^2(theta/2) q)] dtheta.

    In w = sin^2(theta/2) the bracket is -expm1(-2 q w/(1-w) - d log(1-w)).
    """
    s = check_s(s)
    d = _check_d(d)
    q = _as_q(q)
    flat = np.atleast_1d(q).ravel()

    def reduced(w: np.ndarray) -> np.ndarray:
        w = w[:, None]
        exponent = -2.0 * flat * w / (1.0 - w) - d * np.log1p(-w)
        return -np.expm1(np.maximum(exponent, settings.GAUSSIAN_FLOOR)) / w

    def phi(theta: np.ndarray) -> np.ndarray:
        half = 0.5 * np.asarray(theta)[:, None]
        exponent = -2.0 * np.tan(half) ** 2 * flat - 2.0 * d * np.log(np.cos(half))
        return -np.expm1(np.maximum(exponent, settings.GAUSSIAN_FLOOR))

    test = AngularTest(phi=phi, phi0=np.zeros_like(flat), reduced=reduced, scale=1.0 / (1.0 + flat.max()), name="l1")
    values = fp_integrate(test, s, tol, relative=relative)
    return _scalar_or_array(np.asarray(values).reshape(q.shape))


def _l2_bracket(sigma: np.ndarray, q: np.ndarray, d: int) -> np.ndarray:
    """
    2^d e^{-2q} - 2^{d-1} e^{-2q(1-sigma)/(1+sigma)} (1+sigma)^{-d}
                - 2^{d-1} e^{-2q(1+sigma)/(1-sigma)} (1-sigma)^{-d},

    written as -2^{d-1} e^{-2q} (expm1(a+) + expm1(a-)) so the second-order
    cancellation at sigma = 0 is carried by expm1.
    """
    a_plus = 4.0 * q * sigma / (1.0 + sigma) - d * np.log1p(sigma)
    a_minus = -4.0 * q * sigma / (1.0 - sigma) - d * np.log1p(-sigma)
    near = -(2.0 ** (d - 1)) * np.exp(-2.0 * np.minimum(q, SMALL_Q)) * (
        np.expm1(np.minimum(a_plus, -settings.GAUSSIAN_FLOOR)) + np.expm1(a_minus)
    )
    # far from the origin the two exponentials no longer cancel
    far = -(2.0 ** (d - 1)) * (
        _clamped_exp(a_plus - 2.0 * q) + _clamped_exp(a_minus - 2.0 * q) - 2.0 * _clamped_exp(-2.0 * q)
    )
    return np.where(q <= SMALL_Q, near, far)


def _clamped_exp(x: np.ndarray) -> np.ndarray:
    return np.where(x < settings.GAUSSIAN_FLOOR, 0.0, np.exp(np.maximum(x, settings.GAUSSIAN_FLOOR)))


def l2_of_q(q, s: float, d: int = 1, tol: Optional[float] = None):
    """int beta(theta) x (three-Gaussian bracket in sin(theta)) dtheta, relative accuracy."""
    s = check_s(s)
    d = _check_d(d)
    q = _as_q(q)
    flat = np.atleast_1d(q).ravel()

    def reduced(w: np.ndarray) -> np.ndarray:
        w = w[:, None]
        sigma = 2.0 * np.sqrt(w * (1.0 - w))
        return _l2_bracket(sigma, flat, d) / w

    def phi(theta: np.ndarray) -> np.ndarray:
        return _l2_bracket(np.sin(np.abs(np.asarray(theta)))[:, None], flat, d)

    scale = 1.0 / (1.0 + flat.max()) ** 2
    test = AngularTest(phi=phi, phi0=np.zeros_like(flat), reduced=reduced, scale=scale, name="l2")
    values = fp_integrate(test, s, tol, relative=True)
    return _scalar_or_array(np.asarray(values).reshape(q.shape))


def l1_symbol(p: PhasePoint, s: float, tol: Optional[float] = None) -> float:
    if p.d != 1:
        raise DomainError("l1_symbol is the one-dimensional symbol; use l1_symbol_d")
    return float(l1_of_q(p.q, s, 1, tol))


def l2_symbol(p: PhasePoint, s: float, tol: Optional[float] = None) -> float:
    if p.d != 1:
        raise DomainError("l2_symbol is the one-dimensional symbol; use l2_symbol_d")
    return float(l2_of_q(p.q, s, 1, tol))


def l1_symbol_d(p: PhasePoint, s: float, d: Optional[int] = None, tol: Optional[float] = None) -> float:
    d = p.d if d is None else _check_d(d)
    return float(l1_of_q(p.q, s, d, tol))


def l2_symbol_d(p: PhasePoint, s: float, d: Optional[int] = None, tol: Optional[float] = None) -> float:
    d = p.d if d is None else _check_d(d)
    return float(l2_of_q(p.q, s, d, tol))


def full_symbol(p: PhasePoint, s: float, d: Optional[int] = None, tol: Optional[float] = None) -> float:
    d = p.d if d is None else _check_d(d)
    return float(l1_of_q(p.q, s, d, tol) + l2_of_q(p.q, s, d, tol))


def full_of_q(q, s: float, d: int = 1, tol: Optional[float] = None):
    return l1_of_q(q, s, d, tol) + l2_of_q(q, s, d, tol)


def l2_projection_series(q, s: float, d: int = 1, terms: int = PROJECTION_TERMS):
    """-sum_l lambda''_l sigma(P_{2l}); agrees with l2_of_q."""
    s = check_s(s)
    q = _as_q(q)
    total = np.zeros_like(q, dtype=float)
    for l in range(1, int(terms) + 1):
        total = total - lambda_doubleprime(l, s) * projection_symbol(2 * l, q, d)
    return _scalar_or_array(total)


# ─────────────────────────────────────────────────────────
# Asymptotic expansion of l1
# ─────────────────────────────────────────────────────────

def taylor_coefficients(s: float, N: int, d: int = 1) -> np.ndarray:
    """a_0..a_N of kappa_d(z) = (1 + z)^{s+d-1} e^{2z}."""
    s = check_s(s)
    d = _check_d(d)
    power = s + d - 1.0
    coeffs = np.empty(int(N) + 1)
    for j in range(int(N) + 1):
        i = np.arange(j + 1)
        coeffs[j] = float(np.sum(special.binom(power, i) * 2.0 ** (j - i) / special.factorial(j - i)))
    return coeffs


def constructive_coefficients(s: float, N: int, d: int = 1) -> np.ndarray:
    """c_1..c_N with c_j = -2^{1+s-j} Gamma(j - s) a_j."""
    a = taylor_coefficients(s, N, d)
    j = np.arange(1, int(N) + 1)
    return -(2.0 ** (1.0 + s - j)) * special.gamma(j - s) * a[1:]


def l1_remainder(lam, s: float, d: int = 1, tol: Optional[float] = None):
    """
    l1 - (c0 lambda^s - d0), computed without forming the difference:

        -2 int_0^T t^{-1-s} (kappa_d(t) - 1) e^{-2 t lambda} dt + 2 (2 lambda)^s Gamma(-s, 2 lambda T)

    with T = tan^2(pi/8).  Gamma(-s, x) = (x^{-s} e^{-x} - Gamma(1-s, x)) / s.
    """
    s = check_s(s)
    d = _check_d(d)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 1.0):
        raise DomainError("lambda = 1 + q is at least 1")
    flat = np.atleast_1d(lam).ravel()

    def divided(t: np.ndarray) -> np.ndarray:
        t = t[:, None]
        kappa_minus_one = np.expm1((s + d - 1.0) * np.log1p(t) + 2.0 * t)
        return kappa_minus_one / t * np.exp(-2.0 * t * flat)

    integral = singular_moment(divided, T_MAX, s, scale=1.0 / flat.max(), tol=tol or 1e-13, floor=1e-300)
    x = 2.0 * flat * T_MAX
    upper_gamma = (x ** (-s) * np.exp(-x) - special.gamma(1.0 - s) * special.gammaincc(1.0 - s, x)) / s
    values = -2.0 * np.asarray(integral) + 2.0 * (2.0 * flat) ** s * upper_gamma
    return _scalar_or_array(values.reshape(lam.shape))


@dataclass(frozen=True, eq=False)
class AsymptoticExpansion:
    s: float
    order: int
    c0: float
    d0: float
    coefficients: np.ndarray
    provenance: List[str]
    d: int = 1
    constructive: Optional[np.ndarray] = None
    fitted: Optional[np.ndarray] = None
    fit_relative_errors: Dict[int, float] = field(default_factory=dict)

    def evaluate(self, lam, order: Optional[int] = None):
        order = self.order if order is None else min(int(order), self.order)
        lam = np.asarray(lam, dtype=float)
        total = self.c0 * lam ** self.s - self.d0
        for j in range(1, order + 1):
            total = total + self.coefficients[j - 1] * lam ** (self.s - j)
        return _scalar_or_array(total)

    def residual(self, lam, order: Optional[int] = None):
        """l1 - expansion through `order`, from the cancellation-free remainder."""
        order = self.order if order is None else min(int(order), self.order)
        lam = np.asarray(lam, dtype=float)
        total = np.asarray(l1_remainder(lam, self.s, self.d))
        for j in range(1, order + 1):
            total = total - self.coefficients[j - 1] * lam ** (self.s - j)
        return _scalar_or_array(total)


def fit_remainder_coefficients(
    s: float, terms: int, d: int = 1, lams: Sequence[float] = FIT_LAMBDAS
) -> np.ndarray:
    """Least-squares c_1..c_terms from fp-evaluated l1 - (c0 lambda^s - d0) on a dyadic grid."""
    s = check_s(s)
    lams = np.asarray(lams, dtype=float)
    data = l1_of_q(lams - 1.0, s, d, tol=1e-14, relative=True) - (c0(s) * lams ** s - d0(s))
    basis = np.stack([lams ** (s - j) for j in range(1, terms + 1)], axis=1)
    # rows relative to the leading remainder, columns normalized
    rows = lams ** (1.0 - s)
    scaled = basis * rows[:, None]
    norms = np.linalg.norm(scaled, axis=0)
    solution, *_ = np.linalg.lstsq(scaled / norms, data * rows, rcond=None)
    return solution / norms


def expansion_coefficients(s: float, N: int, d: int = 1, fit: bool = True, prefer: str = "constructive") -> AsymptoticExpansion:
    s = check_s(s)
    d = _check_d(d)
    if int(N) != N or not 0 <= N <= MAX_ORDER:
        raise DomainError(f"expansion order must be in 0..{MAX_ORDER}, got {N}")
    if prefer not in ("constructive", "fitted"):
        raise DomainError(f"prefer must be 'constructive' or 'fitted', got {prefer!r}")
    N = int(N)

    constructive = constructive_coefficients(s, N, d)
    fitted = None
    errors: Dict[int, float] = {}
    if fit and N > 0:
        terms = max(N, 2) + 2
        fitted = fit_remainder_coefficients(s, terms, d)[:N]
        for j in range(1, N + 1):
            errors[j] = abs(fitted[j - 1] - constructive[j - 1]) / abs(constructive[j - 1])
            gate = FIT_GATES.get(j)
            if gate is not None and errors[j] > gate:
                logger.warning("Failed expansion cross-check: c_%d relative gap %.3e", j, errors[j])
                raise ConsistencyError(
                    f"constructive and fitted c_{j} disagree",
                    {"j": j, "constructive": float(constructive[j - 1]), "fitted": float(fitted[j - 1]), "relative": errors[j], "gate": gate},
                )

    if prefer == "fitted" and fitted is not None:
        stored, provenance = fitted.copy(), ["fitted"] * N
    else:
        stored, provenance = constructive.copy(), ["constructive"] * N

    return AsymptoticExpansion(
        s=s,
        order=N,
        c0=c0(s),
        d0=d0(s),
        coefficients=stored,
        provenance=provenance,
        d=d,
        constructive=constructive,
        fitted=fitted,
        fit_relative_errors=errors,
    )


def residual_slope(expansion: AsymptoticExpansion, order: int, lams: Sequence[float]) -> float:
    """Log-log slope of |l1 - expansion through `order`| over `lams`."""
    lams = np.asarray(lams, dtype=float)
    residual = np.abs(np.asarray(expansion.residual(lams, order)))
    slope, _ = np.polyfit(np.log(lams), np.log(residual), 1)
    return float(slope)


def fit_leading_constants(s: float, d: int = 1, lams: Sequence[float] = FIT_LAMBDAS):
    """Fit l1_d ~ A lambda^s - B + C1 lambda^{s-1} + C2 lambda^{s-2}; returns (A, B)."""
    s = check_s(s)
    lams = np.asarray(lams, dtype=float)
    data = np.asarray(l1_of_q(lams - 1.0, s, d, tol=1e-14, relative=True))
    basis = np.stack([lams ** s, -np.ones_like(lams), lams ** (s - 1.0), lams ** (s - 2.0)], axis=1)
    scaled = basis / lams[:, None] ** s
    norms = np.linalg.norm(scaled, axis=0)
    solution, *_ = np.linalg.lstsq(scaled / norms, data / lams ** s, rcond=None)
    solution = solution / norms
    return float(solution[0]), float(solution[1])


# ─────────────────────────────────────────────────────────
# Tabulated radial symbols
# ─────────────────────────────────────────────────────────

class RadialSymbol:
    """
    A radial symbol tabulated on a uniform grid in log(1 + q) and interpolated
    with a cubic spline.  Filling the table costs one vectorized quadrature.
    """

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], q_max: float, nodes: int = 2048, name: str = "symbol"):
        if not q_max > 0.0:
            raise DomainError(f"q_max must be positive, got {q_max}")
        if int(nodes) < 4:
            raise DomainError("a spline table needs at least 4 nodes")
        self.name = name
        self.q_max = float(q_max)
        self.u = np.linspace(0.0, math.log1p(self.q_max), int(nodes))
        self.q = np.expm1(self.u)
        self.values = np.asarray(func(self.q), dtype=float)
        self._spline = CubicSpline(self.u, self.values)
        logger.debug("Tabulated %s on %d nodes up to q=%g", name, nodes, q_max)

    @classmethod
    def for_kind(cls, kind: str, s: float, d: int = 1, q_max: float = 1000.0, nodes: int = 2048, t: float = 1.0) -> "RadialSymbol":
        funcs = {
            "l1": lambda q: l1_of_q(q, s, d),
            "l2": lambda q: l2_of_q(q, s, d),
            "full": lambda q: full_of_q(q, s, d),
            "mehler": lambda q: mehler_of_q(t, q, d),
        }
        if kind not in funcs:
            raise DomainError(f"unknown symbol kind {kind!r}; expected one of {sorted(funcs)}")
        return cls(funcs[kind], q_max=q_max, nodes=nodes, name=kind)

    def __call__(self, q) -> np.ndarray:
        q = _as_q(q)
        if np.any(q > self.q_max * (1.0 + 1e-12)):
            raise DomainError(f"{self.name} is tabulated only up to q = {self.q_max:g}")
        return self._spline(np.log1p(q))

    def on_phase(self, v, xi) -> np.ndarray:
        return self(phase_q(v, xi))
