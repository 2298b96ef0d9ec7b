"""
Exception hierarchy for crossflux.
"""

from typing import Optional


class CrossfluxError(Exception):
    """Base class of every error raised by crossflux."""


class InvalidParameterError(CrossfluxError, ValueError):
    """A coefficient, index or control value is out of range."""


class WeakCooperationError(InvalidParameterError):
    """The weak cooperative condition c1/c2 < b1/b2 < a1/a2 fails."""


class DomainError(CrossfluxError, ValueError):
    """An argument lies outside the domain of a function."""


class SizeMismatchError(CrossfluxError, ValueError):
    """Grid and state sizes (or domains) disagree."""


class RegimeError(CrossfluxError, ValueError):
    """A scalar-field operation was requested outside regime (ii)."""


class ConfigError(CrossfluxError, ValueError):
    """Invalid experiment configuration, located by file and line."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None) -> None:
        self.path = path
        self.line = line
        self.problem = message
        location = path or "<config>"
        if line is not None:
            location = f"{location}:{line}"
        super().__init__(f"{location}: {message}")


class NumericalError(CrossfluxError, RuntimeError):
    """Base class of numerical failures."""


class SingularMatrixError(NumericalError):
    """A factorization met a (numerically) zero pivot."""

    def __init__(self, pivot_index: int, message: Optional[str] = None) -> None:
        self.pivot_index = pivot_index
        super().__init__(message or f"Matrix is numerically singular at pivot {pivot_index}")


class BranchSwitchError(NumericalError):
    """Switching onto a bifurcating branch failed."""

    def __init__(self, message: str, collapsed: bool = False) -> None:
        self.collapsed = collapsed
        super().__init__(message)


class PositivityViolationError(NumericalError):
    """A time step produced a clearly negative density."""

    def __init__(self, min_value: float) -> None:
        self.min_value = min_value
        super().__init__(f"Positivity violated: minimum nodal value {min_value:.3e}")


class NoSolutionError(NumericalError):
    """The shooting bracket holds no solution of the requested class."""


class ClassificationError(NumericalError):
    """Node counting is undefined for a constant state."""
