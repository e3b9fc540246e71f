"""
Fourier-side collision operator, independent of the Hermite diagonalization.

    K_hat(g, f)(xi) = int_{|theta| <= pi/4} beta(theta)
                      [g_even_hat(xi sin theta) f_hat(xi cos theta) - g_hat(0) f_hat(xi)] dtheta.

The subtracted integrand is split as

    [g_even_hat(xi sin) - g_hat(0)] f_hat(xi cos) + g_hat(0) [f_hat(xi cos) - f_hat(xi)],

and every profile evaluates both brackets without cancellation, so the result
keeps full relative precision.  The linearized operator is
-mu^{-1/2} [K(mu, mu^{1/2} h) + K(mu^{1/2} h, mu)].
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from kacspec.core_math import (
    GridFunction,
    HermiteCoeffs,
    centred_transform,
    grid_nodes,
    hermite_psi_table,
)
from kacspec.errors import AccuracyError, CapabilityError, DomainError, check_s
from kacspec.singular_quadrature import W_MAX, beta_eval, singular_moment

logger = logging.getLogger(__name__)

BOBYLEV_TOL = 1e-13
MAX_BAND = 30
MASK_LEVEL = 1e-14
MASKED_MASS = 1e-12
_CHUNK = 2048
_PRUNE = 1e-20


def _trailing(x: np.ndarray, ndim: int) -> np.ndarray:
    return x.reshape(x.shape + (1,) * (ndim - x.ndim))


def _times(a: np.ndarray, b: np.ndarray, base: int) -> np.ndarray:
    """Product of arrays sharing `base` leading axes, broadcasting batch axes."""
    ndim = max(a.ndim, b.ndim)
    if a.ndim - base and b.ndim - base and a.shape[base:] != b.shape[base:]:
        raise DomainError("profiles carry different batch shapes")
    return _trailing(a, ndim) * _trailing(b, ndim)


# ─────────────────────────────────────────────────────────
# Profiles
# ─────────────────────────────────────────────────────────

class FourierProfile:
    """
    Samples of f_hat on a symmetric xi grid with cubic-spline evaluation.

    Trailing axes of `values` are a batch of profiles sharing the grid.
    """

    def __init__(self, xi: np.ndarray, values: np.ndarray):
        xi = np.asarray(xi, dtype=float)
        values = np.asarray(values, dtype=complex)
        if xi.ndim != 1 or xi.size < 4 or np.any(np.diff(xi) <= 0.0):
            raise DomainError("profile grids must be increasing with at least 4 points")
        if not np.allclose(xi, -xi[::-1], rtol=0.0, atol=1e-12 * float(np.max(np.abs(xi)))):
            raise DomainError("profile grids must be symmetric about 0")
        if values.shape[0] != xi.size:
            raise DomainError(f"{xi.size} grid points but {values.shape[0]} samples")
        self.xi = xi
        self.values = values
        self._splines: Optional[Tuple[CubicSpline, CubicSpline]] = None

    @property
    def batch_shape(self) -> Tuple[int, ...]:
        return tuple(self.values.shape[1:])

    @property
    def xi_max(self) -> float:
        return float(self.xi[-1])

    def is_even(self, tol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.values - self.values[::-1])) <= tol * max(1.0, float(np.max(np.abs(self.values)))))

    @classmethod
    def radial(cls, func: Callable[[np.ndarray], np.ndarray], xi_max: float, points: int = 513) -> "FourierProfile":
        """Even profile sampled from a function of |xi|; symmetric index-exact."""
        xi = np.linspace(-xi_max, xi_max, int(points))
        return cls(xi, func(np.abs(xi)))

    def __call__(self, zeta) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=float)
        if np.any(np.abs(zeta) > self.xi_max * (1.0 + 1e-12)):
            raise DomainError(f"interpolation out of range: |xi| > {self.xi_max:g}")
        if self._splines is None:
            self._splines = (CubicSpline(self.xi, self.values.real, axis=0), CubicSpline(self.xi, self.values.imag, axis=0))
        real, imag = self._splines
        return real(zeta) + 1j * imag(zeta)

    def at_origin(self) -> np.ndarray:
        return self(np.zeros(1))[0]

    def increment(self, zeta: np.ndarray, shift: np.ndarray) -> np.ndarray:
        """f_hat(zeta + shift) - f_hat(zeta)."""
        return self(zeta + shift) - self(zeta)

    def even_increment(self, zeta: np.ndarray) -> np.ndarray:
        """f_even_hat(zeta) - f_hat(0)."""
        return 0.5 * (self(zeta) + self(-zeta)) - self.at_origin()


class SampledProfile(FourierProfile):
    """
    Exact trapezoidal Fourier sum of velocity samples,

        f_hat(zeta) = h sum_j f_j e^{-i v_j zeta},

    evaluated in chunks.  Increments use e^{i a} - 1 = -2 sin^2(a/2) + i sin(a).
    """

    def __init__(self, samples: np.ndarray, step: float):
        samples = np.asarray(samples)
        if samples.shape[0] % 2:
            raise DomainError("velocity samples need an even number of points")
        self.step = float(step)
        nodes = grid_nodes(samples.shape[0], self.step)
        flat = np.abs(samples).reshape(samples.shape[0], -1).max(axis=1)
        keep = flat > _PRUNE * float(flat.max() or 1.0)
        self.nodes = nodes[keep]
        self.samples = samples[keep].astype(complex)

        spectrum, eta = centred_transform(samples, self.step, axis=0)
        n = samples.shape[0]
        super().__init__(grid_nodes(n, eta)[1:], spectrum[1:])

    @classmethod
    def from_grid_function(cls, f: GridFunction) -> "SampledProfile":
        return cls(f.values, f.step)

    @property
    def xi_max(self) -> float:
        return math.pi / self.step

    def _sum(self, zeta: np.ndarray, kernel: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=float)
        flat = zeta.ravel()
        out = np.empty((flat.size,) + self.batch_shape, dtype=complex)
        for start in range(0, flat.size, _CHUNK):
            block = flat[start:start + _CHUNK]
            out[start:start + _CHUNK] = self.step * (kernel(block) @ self.samples)
        return out.reshape(zeta.shape + self.batch_shape)

    def __call__(self, zeta) -> np.ndarray:
        return self._sum(zeta, lambda z: np.exp(-1j * np.outer(z, self.nodes)))

    def at_origin(self) -> np.ndarray:
        return self.step * np.sum(self.samples, axis=0)

    def increment(self, zeta: np.ndarray, shift: np.ndarray) -> np.ndarray:
        zeta, shift = np.broadcast_arrays(np.asarray(zeta, dtype=float), np.asarray(shift, dtype=float))
        pairs = np.stack([zeta.ravel(), shift.ravel()], axis=1)
        nodes = self.nodes

        def kernel(block: np.ndarray) -> np.ndarray:
            z, d = block[:, 0], block[:, 1]
            angle = -np.outer(d, nodes)
            return np.exp(-1j * np.outer(z, nodes)) * (-2.0 * np.sin(0.5 * angle) ** 2 + 1j * np.sin(angle))

        out = np.empty((pairs.shape[0],) + self.batch_shape, dtype=complex)
        for start in range(0, pairs.shape[0], _CHUNK):
            out[start:start + _CHUNK] = self.step * (kernel(pairs[start:start + _CHUNK]) @ self.samples)
        return out.reshape(zeta.shape + self.batch_shape)

    def even_increment(self, zeta: np.ndarray) -> np.ndarray:
        return self._sum(zeta, lambda z: -2.0 * np.sin(0.5 * np.outer(z, self.nodes)) ** 2)


class GaussianProfile(FourierProfile):
    """amplitude * exp(-width * zeta^2); the Maxwellian is width 1/2."""

    def __init__(self, width: float = 0.5, amplitude: float = 1.0, xi_max: float = 40.0, points: int = 257):
        if not width > 0.0:
            raise DomainError(f"Gaussian width must be positive, got {width}")
        self.width = float(width)
        self.amplitude = float(amplitude)
        xi = np.linspace(-xi_max, xi_max, int(points))
        super().__init__(xi, self.amplitude * np.exp(-self.width * xi * xi))

    @property
    def xi_max(self) -> float:
        return math.inf

    def __call__(self, zeta) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=float)
        return (self.amplitude * np.exp(-self.width * zeta * zeta)).astype(complex)

    def at_origin(self) -> np.ndarray:
        return np.asarray(self.amplitude, dtype=complex)

    def increment(self, zeta: np.ndarray, shift: np.ndarray) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=float)
        shift = np.asarray(shift, dtype=float)
        base = self.amplitude * np.exp(-self.width * zeta * zeta)
        return (base * np.expm1(-self.width * shift * (2.0 * zeta + shift))).astype(complex)

    def even_increment(self, zeta: np.ndarray) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=float)
        return (self.amplitude * np.expm1(-self.width * zeta * zeta)).astype(complex)


def maxwellian_profile() -> GaussianProfile:
    return GaussianProfile(width=0.5)


# ─────────────────────────────────────────────────────────
# Collision integrals
# ─────────────────────────────────────────────────────────

def _collision_integral(
    g_hat: FourierProfile,
    f_hat: FourierProfile,
    s: float,
    xi: np.ndarray,
    tol: Optional[float],
) -> np.ndarray:
    s = check_s(s)
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1:
        raise DomainError("xi must be a one-dimensional grid")
    reach = float(np.max(np.abs(xi))) if xi.size else 0.0
    for profile, what in ((g_hat, "g_hat"), (f_hat, "f_hat")):
        if reach > profile.xi_max * (1.0 + 1e-12):
            raise DomainError(f"interpolation out of range: {what} is known up to {profile.xi_max:g}")

    f_xi = f_hat(xi)
    g0 = g_hat.at_origin()

    def reduced(w: np.ndarray) -> np.ndarray:
        w2 = w[:, None]
        sine = 2.0 * np.sqrt(w2 * (1.0 - w2))
        shift = -2.0 * w2 * xi[None, :]
        zeta = np.broadcast_to(xi[None, :], shift.shape)
        g_part = g_hat.even_increment(sine * xi[None, :])
        f_inc = f_hat.increment(zeta, shift)
        f_cos = f_xi[None, ...] + f_inc
        numerator = _times(g_part, f_cos, 2) + _times(np.broadcast_to(g0, f_inc.shape[:2] + np.shape(g0)), f_inc, 2)
        return numerator / _trailing(w2, numerator.ndim)

    scale = 1.0 / (1.0 + reach * reach)
    value = singular_moment(reduced, W_MAX, s, scale=scale, tol=BOBYLEV_TOL if tol is None else tol)
    return 2.0 * np.asarray(value)


def kac_fourier_apply(
    g_hat: FourierProfile,
    f_hat: FourierProfile,
    s: float,
    xi: np.ndarray,
    tol: Optional[float] = None,
) -> FourierProfile:
    values = _collision_integral(g_hat, f_hat, s, xi, tol)
    return FourierProfile(xi, values)


def boltzmann_radial_fourier_apply(
    g_hat: FourierProfile,
    f_hat: FourierProfile,
    s: float,
    d: int,
    xi: np.ndarray,
    tol: Optional[float] = None,
) -> FourierProfile:
    """One-dimensional reduction of the d-dimensional operator on radial profiles of |xi|."""
    if int(d) != d or d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d}")
    for profile, what in ((g_hat, "g_hat"), (f_hat, "f_hat")):
        if not isinstance(profile, GaussianProfile) and not profile.is_even(1e-12):
            raise DomainError(f"{what} is not an even radial profile")
    values = _collision_integral(g_hat, f_hat, s, np.abs(np.asarray(xi, dtype=float)), tol)
    return FourierProfile(xi, values)


def boltzmann_radial_linearized(
    f_profile: FourierProfile, s: float, d: int, xi: np.ndarray, tol: Optional[float] = None
) -> FourierProfile:
    """Fourier side of -[Q(mu, F) + Q(F, mu)] for a radial F = mu^{1/2} h."""
    mu = maxwellian_profile()
    first = boltzmann_radial_fourier_apply(mu, f_profile, s, d, xi, tol)
    second = boltzmann_radial_fourier_apply(f_profile, mu, s, d, xi, tol)
    return FourierProfile(xi, -(first.values + second.values))


# ─────────────────────────────────────────────────────────
# Linearized operator on Hermite coefficients
# ─────────────────────────────────────────────────────────

def _velocity_grid(max_index: int) -> Tuple[float, int]:
    half_width = max(16.0, 2.0 * math.sqrt(max_index + 0.5) + 8.0)
    points = int(2 ** math.ceil(math.log2(16.0 * half_width)))
    return half_width, points


def _apply_columns(columns: np.ndarray, s: float, tol: Optional[float]) -> np.ndarray:
    """Hermite coefficients (K + 1, batch) of the linearized operator applied column-wise."""
    max_index = columns.shape[0] - 1
    half_width, points = _velocity_grid(max_index)
    step = 2.0 * half_width / points
    v = grid_nodes(points, step)
    table = hermite_psi_table(max_index, v)
    root = table[0]

    F = root[:, None] * (table.T @ columns)
    profile = SampledProfile(F, step)
    mu = maxwellian_profile()

    eta = 2.0 * math.pi / (points * step)
    xi_all = grid_nodes(points, eta)
    cut = math.sqrt(max_index + 0.5) + 13.0
    active = np.abs(xi_all) <= cut
    xi = xi_all[active]

    collision = _collision_integral(mu, profile, s, xi, tol)
    collision = collision + _collision_integral(profile, mu, s, xi, tol)

    spectrum = np.zeros((points,) + collision.shape[1:], dtype=complex)
    spectrum[active] = collision
    in_velocity, _ = centred_transform(spectrum, eta, axis=0, inverse=True)
    if np.isrealobj(columns):
        in_velocity = in_velocity.real

    keep = root >= MASK_LEVEL
    # a vanishing result is measured against the input mass
    total = max(float(np.sum(np.abs(in_velocity) ** 2)), float(np.sum(np.abs(F) ** 2)))
    masked = float(np.sum(np.abs(in_velocity[~keep]) ** 2))
    if masked > MASKED_MASS * total:
        logger.warning("Failed tail guard: masked mass fraction %.3e", masked / total)
        raise AccuracyError(
            "result carries mass where mu^{1/2} is below the mask level",
            {"masked_fraction": masked / total, "mask_level": MASK_LEVEL},
        )

    design = (root * table)[:, keep].T
    coeffs, *_ = np.linalg.lstsq(design, -in_velocity[keep], rcond=None)
    return coeffs


def _check_band(max_index: int) -> None:
    if max_index > MAX_BAND:
        raise CapabilityError(f"the Fourier-side oracle supports Hermite indices up to {MAX_BAND}")


def linearized_kac_apply(h: HermiteCoeffs, s: float, tol: Optional[float] = None) -> HermiteCoeffs:
    _check_band(h.max_index)
    coeffs = _apply_columns(np.asarray(h.coeffs)[:, None], s, tol)[:, 0]
    return HermiteCoeffs(coeffs=coeffs, basis=h.basis)


def linearized_kac_matrix(K: int, s: float, tol: Optional[float] = None) -> np.ndarray:
    """Columns are the images of e_0..e_K, computed in one batch."""
    _check_band(K)
    return _apply_columns(np.eye(K + 1), s, tol)


# ─────────────────────────────────────────────────────────
# Two-dimensional sphere formula
# ─────────────────────────────────────────────────────────

def sphere_fourier_apply(
    g_hat: Callable[[np.ndarray], np.ndarray],
    f_hat: Callable[[np.ndarray], np.ndarray],
    s: float,
    xi_points: Sequence[Sequence[float]],
    d: int = 2,
) -> np.ndarray:
    """
    int_{S^1} b(xi.sigma / |xi|) [g_hat(xi-) f_hat(xi+) - g_hat(0) f_hat(xi)] dsigma
    with xi+- = (xi +- |xi| sigma) / 2 and b(cos phi) = beta(phi / 2) / 2.

    Profiles are callables of 2-vectors.  The integrand is symmetrized in the
    angle phi between sigma and xi; near phi = 0 it behaves like phi^{1-2s},
    which the adaptive QUADPACK rule resolves without evaluating the endpoint.
    """
    if d != 2:
        raise CapabilityError("the sphere formula is implemented for d = 2 only")
    s = check_s(s)
    points = np.atleast_2d(np.asarray(xi_points, dtype=float))
    origin = np.zeros(2)
    out = np.empty(points.shape[0], dtype=complex)

    for index, point in enumerate(points):
        radius = float(np.hypot(*point))
        alpha = math.atan2(point[1], point[0])
        base = complex(np.asarray(g_hat(origin)) * np.asarray(f_hat(point)))

        def bracket(phi: float) -> complex:
            total = -2.0 * base
            for sign in (1.0, -1.0):
                sigma = np.array([math.cos(alpha + sign * phi), math.sin(alpha + sign * phi)])
                total += complex(np.asarray(g_hat(0.5 * (point - radius * sigma))) * np.asarray(f_hat(0.5 * (point + radius * sigma))))
            return total

        def weighted(phi: float, part: Callable[[complex], float]) -> float:
            return part(0.5 * beta_eval(0.5 * phi, s) * bracket(phi))

        parts = []
        for part in (lambda z: z.real, lambda z: z.imag):
            value, _ = integrate.quad(
                weighted, 0.0, 0.5 * math.pi, args=(part,), epsabs=1e-12, epsrel=1e-10, limit=200,
            )
            parts.append(value)
        out[index] = complex(parts[0], parts[1])
    return out
