"""
Eigenvalues of the linearized Kac operator and of its radial Boltzmann analogue.

In the Hermite basis the operator is diagonal with

    lambda_{2m+1} = lambda'_{2m+1},   lambda_{2m} = lambda'_{2m} - lambda''_m,
    lambda'_k  = int beta(theta) (1 - cos^k theta) dtheta,
    lambda''_l = int beta(theta) sin^{2l} theta dtheta,

and lambda_k ~ c0 k^s - d0 for large k.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate, special

from kacspec import settings
from kacspec.errors import ConsistencyError, DomainError, check_s
from kacspec.parallel import thread_map
from kacspec.singular_quadrature import W_MAX, AngularTest, fp_integrate, singular_moment

logger = logging.getLogger(__name__)

ROUTES = ("auto", "angular", "substitution", "beta")

# Upper limit of the substitution v = 1 - cos(theta)
V_MAX = 1.0 - 2.0 ** -0.5
# tan^2(pi/8)
T_MAX = 3.0 - 2.0 * math.sqrt(2.0)


def _check_index(k: int, minimum: int = 0) -> int:
    if int(k) != k or k < minimum:
        raise DomainError(f"index must be an integer >= {minimum}, got {k}")
    return int(k)


def _check_route(route: str) -> str:
    if route not in ROUTES:
        raise DomainError(f"route must be one of {ROUTES}, got {route!r}")
    return route


# ─────────────────────────────────────────────────────────
# lambda'_k
# ─────────────────────────────────────────────────────────

def lambda_prime(k: int, s: float, tol: Optional[float] = None, route: str = "auto") -> float:
    k = _check_index(k)
    s = check_s(s)
    route = _check_route(route)
    if k == 0:
        return 0.0
    if route == "auto":
        route = "substitution" if k > settings.LARGE_K_SWITCH else "angular"
    if route == "substitution":
        return lambda_prime_substitution(k, s, tol)
    if route == "beta":
        return lambda_prime_beta(k, s)

    test = AngularTest(
        phi=lambda theta: -np.expm1(k * np.log(np.cos(theta))),
        phi0=0.0,
        scale=1.0 / k,
        name=f"1-cos^{k}",
    )
    return float(fp_integrate(test, s, tol))


def lambda_prime_substitution(k: int, s: float, tol: Optional[float] = None) -> float:
    """2^{1+s} int_0^{1-2^{-1/2}} (1 - (1-v)^k) v^{-1-s} dv."""
    k = _check_index(k)
    s = check_s(s)
    if k == 0:
        return 0.0

    def divided(v: np.ndarray) -> np.ndarray:
        return -np.expm1(k * np.log1p(-v)) / v

    value = singular_moment(divided, V_MAX, s, scale=1.0 / k, tol=tol)
    return float(2.0 ** (1.0 + s) * value)


def lambda_prime_beta(k: int, s: float) -> float:
    """
    Closed form through the incomplete beta function.

    Integrating the substitution form by parts gives
    (2^{1+s}/s) [k B(1-s, k) I_V(1-s, k) - V^{-s} (1 - (1-V)^k)].
    """
    k = _check_index(k)
    s = check_s(s)
    if k == 0:
        return 0.0
    log_kb = math.log(k) + special.betaln(1.0 - s, k)
    main = math.exp(log_kb) * special.betainc(1.0 - s, k, V_MAX)
    boundary = V_MAX ** (-s) * -math.expm1(k * math.log1p(-V_MAX))
    return float(2.0 ** (1.0 + s) / s * (main - boundary))


# ─────────────────────────────────────────────────────────
# lambda''_l
# ─────────────────────────────────────────────────────────

def lambda_doubleprime(l: int, s: float, tol: Optional[float] = None, route: str = "auto") -> float:
    l = _check_index(l, minimum=1)
    s = check_s(s)
    route = _check_route(route)
    if route == "auto":
        route = "beta" if 2 * l > settings.LARGE_K_SWITCH else "angular"
    if route == "beta":
        return lambda_doubleprime_beta(l, s)

    # sin^2(theta) = 4 w (1 - w)
    def reduced(w: np.ndarray) -> np.ndarray:
        return np.exp(l * np.log(4.0 * w * (1.0 - w)) - np.log(w))

    test = AngularTest(
        phi=lambda theta: np.sin(theta) ** (2 * l),
        phi0=0.0,
        reduced=reduced,
        name=f"sin^{2 * l}",
    )
    return float(fp_integrate(test, s, tol))


def lambda_doubleprime_beta(l: int, s: float) -> float:
    """2 * 4^l * B(l - s, l + 1) * I_W(l - s, l + 1), W = sin^2(pi/8)."""
    l = _check_index(l, minimum=1)
    s = check_s(s)
    log_value = math.log(2.0) + l * math.log(4.0) + special.betaln(l - s, l + 1.0)
    return float(math.exp(log_value) * special.betainc(l - s, l + 1.0, W_MAX))


def lambda_doubleprime_bound(l: int, s: float) -> float:
    """Exponential upper bound (4^{2s} pi / (1 - s)) e^{-2 l ln(4/pi)}."""
    l = _check_index(l, minimum=1)
    s = check_s(s)
    return 4.0 ** (2.0 * s) * math.pi / (1.0 - s) * math.exp(-2.0 * l * math.log(4.0 / math.pi))


# ─────────────────────────────────────────────────────────
# Eigenvalues
# ─────────────────────────────────────────────────────────

def kac_eigenvalue(k: int, s: float, tol: Optional[float] = None) -> float:
    k = _check_index(k)
    s = check_s(s)
    if k == 0:
        return 0.0
    if k % 2:
        return lambda_prime(k, s, tol)
    return lambda_prime(k, s, tol) - lambda_doubleprime(k // 2, s, tol)


def radial_multiplicity(k: int, d: int) -> int:
    """dim of the degree-2k eigenspace of the d-dimensional oscillator."""
    k = _check_index(k)
    d = _check_index(d, minimum=1)
    return math.comb(2 * k + d - 1, d - 1)


@dataclass(frozen=True)
class RadialEigenvalue:
    k: int
    d: int
    value: float
    multiplicity: int

    @property
    def hermite_index(self) -> int:
        return 2 * self.k


def boltzmann_radial_eigenvalue(k: int, s: float, d: int, tol: Optional[float] = None) -> RadialEigenvalue:
    k = _check_index(k, minimum=1)
    d = _check_index(d)
    if d < 2:
        raise DomainError(f"the radial Boltzmann operator needs d >= 2, got {d}")
    value = kac_eigenvalue(2 * k, s, tol)
    if k == 1:
        value = 0.0
    return RadialEigenvalue(k=k, d=d, value=value, multiplicity=radial_multiplicity(k, d))


# ─────────────────────────────────────────────────────────
# Asymptotic constants
# ─────────────────────────────────────────────────────────

def c0(s: float) -> float:
    s = check_s(s)
    return 2.0 ** (1.0 + s) * math.gamma(1.0 - s) / s


def d0(s: float) -> float:
    s = check_s(s)
    return 2.0 ** (1.0 + s) * (2.0 + math.sqrt(2.0)) ** s / s


def d0_integral(s: float) -> float:
    """
    d0 from its integral definition

        2 (1 + T)^{s-1} / (s T^s) + (2 (1 - s) / s) int_0^T (1 + t)^{s-2} t^{-s} dt

    with T = tan^2(pi/8); the endpoint singularity is handled by the
    algebraic weight of QUADPACK.
    """
    s = check_s(s)
    boundary = 2.0 * (1.0 + T_MAX) ** (s - 1.0) / (s * T_MAX ** s)
    value, _ = integrate.quad(
        lambda t: (1.0 + t) ** (s - 2.0),
        0.0,
        T_MAX,
        weight="alg",
        wvar=(-s, 0.0),
        epsabs=1e-14,
        epsrel=1e-13,
    )
    return boundary + 2.0 * (1.0 - s) / s * value


@dataclass(frozen=True)
class AsymptoticConstants:
    s: float
    c0: float
    d0: float

    @classmethod
    def for_s(cls, s: float) -> "AsymptoticConstants":
        return cls(s=check_s(s), c0=c0(s), d0=d0(s))

    def leading(self, x: np.ndarray) -> np.ndarray:
        return self.c0 * np.asarray(x, dtype=float) ** self.s - self.d0


@dataclass(frozen=True, eq=False)
class KacSpectrum:
    s: float
    eigenvalues: np.ndarray
    lambda_prime: np.ndarray
    # index 0 is unused (nan)
    lambda_doubleprime: np.ndarray
    constants: AsymptoticConstants
    metadata: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        s: float,
        K: int,
        tol: Optional[float] = None,
        threads: Optional[int] = None,
        route: str = "auto",
    ) -> "KacSpectrum":
        s = check_s(s)
        K = _check_index(K, minimum=2)
        tol = settings.FP_TOL if tol is None else float(tol)

        primes = np.array([0.0] + thread_map(partial(_prime_job, s=s, tol=tol, route=route), range(1, K + 1), threads))
        doubles = np.full(K // 2 + 1, np.nan)
        doubles[1:] = thread_map(partial(_doubleprime_job, s=s, tol=tol), range(1, K // 2 + 1), threads)

        eigenvalues = primes.copy()
        eigenvalues[2::2] -= doubles[1:]
        eigenvalues[0] = 0.0

        kernel_tol = 10.0 * tol * max(1.0, abs(primes[2]))
        if abs(eigenvalues[2]) > kernel_tol:
            logger.warning("Failed kernel check: lambda_2 = %.3e", eigenvalues[2])
            raise ConsistencyError(
                "lambda_2 does not vanish",
                {"lambda_2": float(eigenvalues[2]), "threshold": kernel_tol},
            )
        eigenvalues[2] = 0.0

        negative = eigenvalues < -tol * np.maximum(1.0, primes)
        if np.any(negative):
            k = int(np.argmax(negative))
            raise ConsistencyError(
                f"negative eigenvalue at k = {k}", {"k": k, "value": float(eigenvalues[k])}
            )

        logger.info("Built Kac spectrum s=%g K=%d", s, K)
        return cls(
            s=s,
            eigenvalues=eigenvalues,
            lambda_prime=primes,
            lambda_doubleprime=doubles,
            constants=AsymptoticConstants.for_s(s),
            metadata={"tol": tol, "K": K},
        )

    @property
    def K(self) -> int:
        return int(self.eigenvalues.size - 1)

    @staticmethod
    def kernel_indices() -> Tuple[int, int]:
        return (0, 2)

    def doubleprime_for(self, k: int) -> float:
        """lambda''_{k/2} for even k >= 2, nan otherwise."""
        if k >= 2 and k % 2 == 0:
            return float(self.lambda_doubleprime[k // 2])
        return math.nan

    def table_rows(self) -> List[Tuple[int, float, float, float, float]]:
        rows = []
        for k in range(self.K + 1):
            lam = float(self.eigenvalues[k])
            ratio = lam / (self.constants.c0 * k ** self.s) if k else math.nan
            rows.append((k, lam, float(self.lambda_prime[k]), self.doubleprime_for(k), ratio))
        return rows


def _prime_job(k: int, s: float, tol: float, route: str) -> float:
    return lambda_prime(k, s, tol, route=route)


def _doubleprime_job(l: int, s: float, tol: float) -> float:
    return lambda_doubleprime(l, s, tol)


@dataclass(frozen=True)
class DiagnosticRow:
    k: int
    eigenvalue: float
    ratio: float
    deviation: float


def asymptotic_diagnostic(
    K: int,
    s: float,
    spectrum: Optional[KacSpectrum] = None,
    threads: Optional[int] = None,
) -> List[DiagnosticRow]:
    """Rows (k, lambda_k, lambda_k / k^s, lambda_k - c0 k^s) for k = 1..K."""
    K = _check_index(K)
    if K < 100:
        raise DomainError(f"asymptotic diagnostic needs K >= 100, got {K}")
    s = check_s(s)
    if spectrum is None or spectrum.K < K or spectrum.s != s:
        spectrum = KacSpectrum.build(s, K, threads=threads)
    c = spectrum.constants.c0
    rows = []
    for k in range(1, K + 1):
        lam = float(spectrum.eigenvalues[k])
        rows.append(DiagnosticRow(k=k, eigenvalue=lam, ratio=lam / k ** s, deviation=lam - c * k ** s))
    return rows
