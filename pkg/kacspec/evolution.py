"""Semigroup evolution in the Hermite basis and the coercivity sandwich."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from kacspec.bobylev import linearized_kac_matrix
from kacspec.core_math import HermiteCoeffs
from kacspec.errors import DomainError, UndefinedQuantityError, check_s
from kacspec.spectrum import KacSpectrum

logger = logging.getLogger(__name__)


def _kernel_mask(size: int) -> np.ndarray:
    mask = np.ones(size, dtype=bool)
    mask[[k for k in KacSpectrum.kernel_indices() if k < size]] = False
    return mask


def _coercive_mask(size: int, d: int) -> np.ndarray:
    """Active modes; for d >= 2 only the radial modes 2k are kept."""
    mask = _kernel_mask(size)
    if d != 1:
        mask[1::2] = False
    return mask


@dataclass(frozen=True, eq=False)
class EvolutionState:
    coeffs: HermiteCoeffs
    t: float
    spectrum: KacSpectrum

    def __post_init__(self) -> None:
        if self.t < 0.0:
            raise DomainError(f"time must be >= 0, got {self.t}")
        if self.coeffs.max_index > self.spectrum.K:
            raise DomainError(
                f"state has modes up to {self.coeffs.max_index} but the spectrum stops at {self.spectrum.K}"
            )

    @property
    def rates(self) -> np.ndarray:
        return self.spectrum.eigenvalues[: self.coeffs.max_index + 1]

    def norm(self) -> float:
        return math.sqrt(self.coeffs.norm_squared())


def semigroup_evolve(state: EvolutionState, dt: float) -> EvolutionState:
    dt = float(dt)
    if dt < 0.0:
        raise DomainError(f"time step must be >= 0, got {dt}")
    coeffs = state.coeffs.coeffs * np.exp(-dt * state.rates)
    return EvolutionState(
        coeffs=HermiteCoeffs(coeffs=coeffs, basis=state.coeffs.basis),
        t=state.t + dt,
        spectrum=state.spectrum,
    )


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    # shape (len(times), K + 1)
    coeffs: np.ndarray

    def rows(self) -> List[Tuple[float, int, float, float]]:
        """(t, mode, coeff, log_abs); log_abs is -inf for vanishing coefficients."""
        out = []
        with np.errstate(divide="ignore"):
            logs = np.log(np.abs(self.coeffs))
        for i, t in enumerate(self.times):
            for k in range(self.coeffs.shape[1]):
                out.append((float(t), k, float(self.coeffs[i, k].real), float(logs[i, k])))
        return out


def evolve_trajectory(state: EvolutionState, times: Sequence[float]) -> Trajectory:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(times < state.t) or np.any(np.diff(times) < 0.0):
        raise DomainError("trajectory times must be sorted and not before the state time")
    coeffs = np.stack([semigroup_evolve(state, t - state.t).coeffs.coeffs for t in times])
    return Trajectory(times=times, coeffs=coeffs)


def decay_rate_fit(trajectory: Trajectory, k: int) -> float:
    """Least-squares slope of log|c_k(t)|."""
    if trajectory.times.size < 3:
        raise DomainError("a decay-rate fit needs at least 3 time samples")
    if not 0 <= k < trajectory.coeffs.shape[1]:
        raise DomainError(f"mode {k} is not part of the trajectory")
    column = np.abs(trajectory.coeffs[:, k])
    if column[0] == 0.0 or np.any(column == 0.0):
        raise UndefinedQuantityError(f"mode {k} vanishes; its decay rate is undefined")
    slope, _ = np.polyfit(trajectory.times, np.log(column), 1)
    return float(slope)


@dataclass(frozen=True)
class CoercivityReport:
    dirichlet: float
    sobolev_norm: float
    c_min: float
    c_max: float
    d: int = 1

    @property
    def lower_holds(self) -> bool:
        return self.c_min * self.sobolev_norm <= self.dirichlet * (1.0 + 1e-12) + 1e-300

    @property
    def upper_holds(self) -> bool:
        return self.dirichlet <= self.c_max * self.sobolev_norm * (1.0 + 1e-12) + 1e-300

    @property
    def holds(self) -> bool:
        return self.lower_holds and self.upper_holds

    @property
    def ratio(self) -> float:
        return self.c_max / self.c_min


def coercivity_constants(spectrum: KacSpectrum, K: Optional[int] = None, d: int = 1) -> Tuple[float, float]:
    """
    min and max over active n <= K of lambda_n / (n + d/2)^s.

    For d >= 2 the radial operator lives on the even indices n = 2k.
    """
    K = spectrum.K if K is None else int(K)
    k = np.arange(K + 1)
    mask = _coercive_mask(K + 1, d)
    ratios = spectrum.eigenvalues[: K + 1][mask] / (k[mask] + 0.5 * d) ** spectrum.s
    return float(ratios.min()), float(ratios.max())


def coercivity_check(
    f: HermiteCoeffs,
    s: float,
    K: Optional[int] = None,
    d: int = 1,
    spectrum: Optional[KacSpectrum] = None,
) -> CoercivityReport:
    s = check_s(s)
    K = f.max_index if K is None else int(K)
    if f.max_index > K:
        raise DomainError(f"f has modes beyond K = {K}")
    if spectrum is None or spectrum.K < K or spectrum.s != s:
        spectrum = KacSpectrum.build(s, max(K, 2))

    c = np.abs(f.coeffs) ** 2
    k = np.arange(c.size)
    if d != 1 and np.any(c[1::2] > 0.0):
        raise DomainError(f"radial coercivity in d = {d} takes even modes only")
    mask = _coercive_mask(c.size, d)
    dirichlet = float(np.sum(spectrum.eigenvalues[: c.size] * c))
    sobolev = float(np.sum((k[mask] + 0.5 * d) ** s * c[mask]))
    c_min, c_max = coercivity_constants(spectrum, K, d)
    return CoercivityReport(dirichlet=dirichlet, sobolev_norm=sobolev, c_min=c_min, c_max=c_max, d=d)


def equilibrium_residual(state: EvolutionState, t: float) -> Tuple[float, float]:
    """
    ||(1 - P) f(t)|| and the bound e^{-lambda_min t} ||(1 - P) f(0)||,
    lambda_min taken over the active modes outside the kernel.
    """
    evolved = semigroup_evolve(state, t)
    mask = _kernel_mask(state.coeffs.coeffs.size)
    initial = state.coeffs.coeffs[mask]
    active = np.abs(initial) > 0.0
    residual = float(np.linalg.norm(evolved.coeffs.coeffs[mask]))
    if not np.any(active):
        return residual, 0.0
    rate = float(state.rates[mask][active].min())
    return residual, math.exp(-rate * t) * float(np.linalg.norm(initial))


@dataclass(frozen=True, eq=False)
class EulerCheck:
    h: float
    error_h: np.ndarray
    error_half: np.ndarray
    ratios: np.ndarray
    modes: List[int] = field(default_factory=list)

    def passed(self, low: float = 3.5, high: float = 4.5) -> bool:
        ratios = self.ratios[self.modes]
        return bool(np.all((ratios >= low) & (ratios <= high)))

    def summary(self) -> Dict[str, float]:
        ratios = self.ratios[self.modes]
        return {"h": self.h, "min_ratio": float(ratios.min()), "max_ratio": float(ratios.max())}


def implicit_euler_check(s: float, K: int, h: float, spectrum: Optional[KacSpectrum] = None) -> EulerCheck:
    """
    One implicit Euler step (I + h L)^{-1} with L from the Fourier-side
    oracle, compared with the exact semigroup at h and h/2.  The local
    error is O(h^2) per mode, so the error ratio approaches 4.
    """
    s = check_s(s)
    if not h > 0.0:
        raise DomainError(f"step must be positive, got {h}")
    spectrum = spectrum if spectrum is not None and spectrum.s == s and spectrum.K >= K else KacSpectrum.build(s, max(K, 2))
    operator = linearized_kac_matrix(K, s)
    rates = spectrum.eigenvalues[: K + 1]
    identity = np.eye(K + 1)

    errors = []
    for step in (h, 0.5 * h):
        stepped = np.linalg.solve(identity + step * operator, identity)
        exact = np.diag(np.exp(-step * rates))
        errors.append(np.abs(np.diag(stepped) - np.diag(exact)))

    mask = _kernel_mask(K + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(errors[1] > 0.0, errors[0] / errors[1], np.nan)
    modes = [k for k in range(K + 1) if mask[k]]
    logger.info("Implicit Euler check s=%g K=%d h=%g", s, K, h)
    return EulerCheck(h=h, error_h=errors[0], error_half=errors[1], ratios=ratios, modes=modes)
