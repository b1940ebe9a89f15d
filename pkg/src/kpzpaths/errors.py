"""Exception hierarchy shared by every module."""

from __future__ import annotations


class KpzError(Exception):
    """Base class for all library errors."""


class DomainError(KpzError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionError(DomainError):
    """Grid dimensions are not positive."""


class CoverageError(KpzError, IndexError):
    """Data needed by a computation is not available in the supplied grid or row."""


class WindowTooSmallError(KpzError):
    """The argmax (or a non-negligible mass) sits on a truncation edge.

    ``edge`` is the boundary index that was hit and ``window`` the half-width in use,
    so callers can enlarge and retry.
    """

    def __init__(self, message: str, *, edge: int, window: int):
        super().__init__(message)
        self.edge = edge
        self.window = window


class NumericError(KpzError, ArithmeticError):
    """An iterative numerical routine failed to converge."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ParameterRangeError(DomainError):
    """Derived parameters fall outside their admissible range."""


class InsufficientDataError(KpzError):
    """Too few usable data points for a fit."""


class ConfigError(KpzError, ValueError):
    """An experiment configuration fails validation."""
