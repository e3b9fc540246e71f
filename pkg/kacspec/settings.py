import logging
import os
from pathlib import Path

from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent.parent
load_dotenv(BASE_DIR / ".env")

KACSPEC = {
    "name": "kacspec",
    "year": 2026,
    "version": "0.1.0",
    "description": "Spectral and phase-space toolkit for the linearized non-cutoff Kac operator",
}

_TRUTHY = {"1", "true", "yes", "on"}
_PROFILES = {"quick", "full"}


def _env_int(name: str, default: int, minimum: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError:
        raise RuntimeError(f"{name} must be an integer, got {raw!r}.") from None
    if value < minimum:
        raise RuntimeError(f"{name} must be >= {minimum}, got {value}.")
    return value


def _env_flag(name: str, default: bool) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    return raw.strip().lower() in _TRUTHY


KACSPEC_THREADS: int = _env_int("KACSPEC_THREADS", os.cpu_count() or 1, 1)

KACSPEC_PROFILE: str = os.getenv("KACSPEC_PROFILE", "quick").strip().lower()
if KACSPEC_PROFILE not in _PROFILES:
    raise RuntimeError(
        f"KACSPEC_PROFILE must be one of {sorted(_PROFILES)}, got {KACSPEC_PROFILE!r}."
    )

KACSPEC_LOG_LEVEL: str = os.getenv("KACSPEC_LOG_LEVEL", "INFO").strip().upper()
if not isinstance(logging.getLevelName(KACSPEC_LOG_LEVEL), int):
    raise RuntimeError(f"KACSPEC_LOG_LEVEL is not a logging level: {KACSPEC_LOG_LEVEL!r}.")

# Stability limit of the Hermite recurrence (capability error above it)
HERMITE_MAX_INDEX: int = _env_int("KACSPEC_HERMITE_MAX_INDEX", 1024, 200)

TAIL_CHECKS: bool = _env_flag("KACSPEC_TAIL_CHECKS", True)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Numerical defaults
FP_TOL = 1e-10
FP_MAX_LEVELS = 40
DEFAULT_BASIS_INDEX = 128
LARGE_K_SWITCH = 64
PHASE_HALF_WIDTH = 14.0
PHASE_POINTS = 512
GAUSSIAN_FLOOR = -700.0
TAIL_TOL = 1e-12
