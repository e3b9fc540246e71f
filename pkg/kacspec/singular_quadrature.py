"""
The angular cross section and finite-part integration against it.

beta(theta) = |cos(theta/2)| / |sin(theta/2)|^{1+2s} on |theta| <= pi/4 is not
integrable at 0.  Against an even C^{1,1} test function with its value at 0
subtracted the integral converges, and with w = sin^2(theta/2)

    int beta (phi_even - phi(0)) dtheta = 2 int_0^W w^{-s} h(w) dw,
    h(w) = (phi_even(theta(w)) - phi(0)) / w,   W = sin^2(pi/8),

where h is smooth.  `singular_moment` integrates the right-hand side with a
Gauss-Jacobi panel at the origin and geometrically graded Gauss-Legendre
panels above it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy import special

from kacspec import settings
from kacspec.errors import AccuracyError, DomainError, SingularityError, check_s

logger = logging.getLogger(__name__)

THETA_MAX = 0.25 * math.pi
W_MAX = math.sin(math.pi / 8.0) ** 2
GRADING = 4.0
BASE_ORDER = 12
ORDER_STEP = 4

Integrand = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CrossSection:
    s: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "s", check_s(self.s))

    def __call__(self, theta: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        return beta_eval(theta, self.s)

    @property
    def small_angle_constant(self) -> float:
        """Limit of beta(theta) |theta|^{1+2s} at 0."""
        return 2.0 ** (1.0 + 2.0 * self.s)


def beta_eval(theta: Union[float, np.ndarray], s: float) -> Union[float, np.ndarray]:
    s = check_s(s)
    theta = np.asarray(theta, dtype=float)
    if np.any(theta == 0.0):
        raise SingularityError("beta is singular at theta = 0")
    if np.any(np.abs(theta) > THETA_MAX * (1.0 + 1e-14)):
        raise DomainError("beta is supported on |theta| <= pi/4")
    half = 0.5 * np.abs(theta)
    values = np.cos(half) / np.sin(half) ** (1.0 + 2.0 * s)
    return float(values) if values.ndim == 0 else values


@dataclass(frozen=True)
class AngularTest:
    """
    Test function for `fp_integrate`.

    `phi` is evaluated on arrays of angles and may return extra trailing axes
    (one integral per trailing entry).  `reduced`, when given, evaluates
    (phi_even - phi(0)) / w directly in w = sin^2(theta/2) and replaces the
    generic divided difference.  `scale` is the smallest w-scale on which the
    integrand varies; panels are graded below it.
    """

    phi: Integrand
    phi0: Optional[Any] = None
    reduced: Optional[Integrand] = None
    scale: float = 1.0
    curvature_bound: Optional[float] = None
    name: str = "phi"


@lru_cache(maxsize=256)
def _jacobi_rule(order: int, exponent: float) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = special.roots_jacobi(order, 0.0, -exponent)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=64)
def _legendre_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = special.roots_legendre(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def graded_rule(upper: float, exponent: float, depth: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for int_0^upper x^{-exponent} h(x) dx."""
    inner = upper * GRADING ** (-depth)
    xj, wj = _jacobi_rule(order, exponent)
    nodes = [0.5 * inner * (1.0 + xj)]
    weights = [(0.5 * inner) ** (1.0 - exponent) * wj]
    if depth > 0:
        xl, wl = _legendre_rule(order)
        edges = upper * GRADING ** (-np.arange(depth + 1, dtype=float))
        lo, hi = edges[1:, None], edges[:-1, None]
        x = 0.5 * (hi - lo) * xl + 0.5 * (hi + lo)
        nodes.append(x.ravel())
        weights.append((0.5 * (hi - lo) * wl * x ** (-exponent)).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def singular_moment(
    func: Integrand,
    upper: float,
    exponent: float,
    scale: float = 1.0,
    tol: Optional[float] = None,
    max_levels: Optional[int] = None,
    floor: float = 1.0,
) -> Union[float, np.ndarray]:
    """
    int_0^upper x^{-exponent} func(x) dx for func smooth down to `scale`.

    `func` maps a 1-D array of nodes to an array whose leading axis runs over
    the nodes.  Each refinement level grades two panels deeper and adds nodes;
    it stops once every component changed by at most tol * max(floor, |value|).
    """
    tol = settings.FP_TOL if tol is None else float(tol)
    max_levels = settings.FP_MAX_LEVELS if max_levels is None else int(max_levels)
    if not exponent < 1.0:
        raise DomainError(f"exponent must be < 1 for an integrable weight, got {exponent}")
    if not upper > 0.0:
        raise DomainError(f"upper limit must be positive, got {upper}")

    base_depth = 0
    if 0.0 < scale < upper:
        base_depth = int(math.ceil(math.log(upper / scale) / math.log(GRADING)))

    previous = None
    change = math.inf
    for level in range(max_levels):
        depth = base_depth + 2 + 2 * level
        order = BASE_ORDER + ORDER_STEP * level
        nodes, weights = graded_rule(upper, exponent, depth, order)
        estimate = np.tensordot(weights, np.asarray(func(nodes)), axes=(0, 0))
        if previous is not None:
            diff = np.abs(estimate - previous)
            bound = tol * np.maximum(floor, np.abs(estimate))
            change = float(np.max(diff))
            logger.debug("level %d depth %d order %d change %.3e", level, depth, order, change)
            if np.all(diff <= bound):
                return float(estimate) if np.ndim(estimate) == 0 else estimate
        previous = estimate

    logger.warning("Failed to converge singular quadrature: last change %.3e", change)
    raise AccuracyError(
        f"tolerance {tol:g} not reached in {max_levels} refinement levels",
        {"tol": tol, "max_levels": max_levels, "last_change": change, "scale": scale},
    )


def _trailing(w: np.ndarray, ndim: int) -> np.ndarray:
    return w.reshape(w.shape + (1,) * (ndim - 1))


def fp_integrate(
    test: AngularTest,
    s: float,
    tol: Optional[float] = None,
    max_levels: Optional[int] = None,
    relative: bool = False,
) -> Union[float, np.ndarray]:
    """Finite part int_{|theta|<=pi/4} beta(theta) (phi_even(theta) - phi(0)) dtheta."""
    s = check_s(s)

    if test.reduced is not None:
        reduced = test.reduced
    else:
        phi = test.phi
        phi0 = np.asarray(phi(np.zeros(1))[0] if test.phi0 is None else test.phi0)

        def reduced(w: np.ndarray) -> np.ndarray:
            theta = 2.0 * np.arcsin(np.sqrt(w))
            even = 0.5 * (np.asarray(phi(theta)) + np.asarray(phi(-theta)))
            return (even - phi0) / _trailing(w, even.ndim)

    value = singular_moment(
        reduced,
        W_MAX,
        s,
        scale=test.scale,
        tol=tol,
        max_levels=max_levels,
        floor=1e-300 if relative else 1.0,
    )
    return 2.0 * value


def fp_cos_polynomial(coeffs: Sequence[float], s: float) -> float:
    """
    Exact finite part for phi(theta) = sum_k coeffs[k] cos^k(theta).

    With cos(theta) = 1 - 2w the divided difference is a polynomial in w and
    every moment int_0^W w^{j-s} dw is elementary.
    """
    s = check_s(s)
    in_w = Polynomial(list(coeffs))(Polynomial([1.0, -2.0]))
    divided = Polynomial((in_w - in_w(0.0)).coef[1:]) if in_w.degree() > 0 else Polynomial([0.0])
    total = 0.0
    for j, q in enumerate(divided.coef):
        total += q * W_MAX ** (j + 1.0 - s) / (j + 1.0 - s)
    return 2.0 * total
