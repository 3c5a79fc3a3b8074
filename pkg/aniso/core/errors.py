"""Exception hierarchy shared by the numerical modules and the CLI."""

from enum import Enum
from typing import Any


class ErrorSeverity(Enum):
    """Severity levels for numerical errors."""
    LOW = "low"          # Recoverable, caller may retry with other settings
    MEDIUM = "medium"    # Solver gave up, partial results may exist
    HIGH = "high"        # Invalid input, nothing was computed
    CRITICAL = "critical"


class AnisoError(Exception):
    """Base exception for all toolkit errors.

    Keyword arguments are kept as ``context`` (iteration, offending point,
    config line, ...) and appended to the message.
    """

    severity = ErrorSeverity.HIGH

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={_short(v)}" for k, v in self.context.items())
        return f"{self.message} ({details})"


def _short(value: Any) -> str:
    text = repr(value)
    return text if len(text) <= 80 else text[:77] + "..."


class ArgumentError(AnisoError, ValueError):
    """Invalid argument: dimension mismatch, non-positive parameter, ..."""
    pass


class DomainError(AnisoError):
    """Point outside the open domain of a potential."""
    pass


class InversionError(AnisoError):
    """Newton inversion of a gradient map did not converge."""
    severity = ErrorSeverity.MEDIUM


class StencilError(AnisoError):
    """Finite-difference stencil touched an infinite value."""
    severity = ErrorSeverity.LOW


class EmptyFeasibleError(AnisoError):
    """Every candidate of a minimization has infinite value."""
    severity = ErrorSeverity.MEDIUM


class NonConvergenceError(AnisoError):
    """Iterative solver hit its iteration cap."""
    severity = ErrorSeverity.MEDIUM


class LineSearchError(AnisoError):
    """No feasible, non-increasing step was found."""
    severity = ErrorSeverity.MEDIUM


class StepFailureError(AnisoError):
    """Worker step could not be brought back into the domain."""
    severity = ErrorSeverity.MEDIUM


class ConfigError(AnisoError):
    """Malformed or unknown configuration entry."""
    pass


class GridCapError(ConfigError):
    """Cartesian product of a grid search exceeds the configured cap."""
    pass
