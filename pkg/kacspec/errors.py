from typing import Any, Dict, Optional


class KacspecError(Exception):
    """Base class; `exit_code` is what the CLI returns for it."""

    exit_code = 1


class DomainError(KacspecError, ValueError):
    exit_code = 2


class SingularityError(DomainError):
    pass


class CapabilityError(KacspecError):
    exit_code = 2


class ConfigValidationError(KacspecError, ValueError):
    exit_code = 2


class UndefinedQuantityError(KacspecError, ValueError):
    exit_code = 2


class AccuracyError(KacspecError, ArithmeticError):
    exit_code = 3

    def __init__(self, message: str, diagnostic: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostic: Dict[str, Any] = dict(diagnostic or {})


class ConsistencyError(KacspecError):
    exit_code = 4

    def __init__(self, message: str, diagnostic: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostic: Dict[str, Any] = dict(diagnostic or {})


class ArtifactIOError(KacspecError):
    exit_code = 5


# Returned when a check breaches its tolerance without raising
TOLERANCE_BREACH_EXIT = AccuracyError.exit_code


def check_s(s: float) -> float:
    """Validate the singularity exponent, returning it as float."""
    s = float(s)
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must lie in (0, 1), got {s}")
    return s
