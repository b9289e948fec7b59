"""Exception types shared across the package."""
from __future__ import annotations


class NlkppError(Exception):
    """Base class for all package errors."""


class KernelError(NlkppError, ValueError):
    """Invalid kernel specification or under-resolved discretization."""


class GridError(NlkppError, ValueError):
    """Invalid grid parameters."""


class MollisonFailure(NlkppError):
    """The dispersal kernel has no positive exponential moment (abscissa 0).

    No finite minimal wave speed exists; front propagation accelerates.
    """


class UnsupportedCriticalCase(NlkppError):
    """Critical boundary case with infinite second exponential moment.

    The tail asymptotics are not covered by the implemented theory; callers
    should not proceed with multiplicity-based conclusions.
    """


class CertificationFailed(NlkppError):
    """A numerically certified inequality failed at some grid location."""

    def __init__(self, message: str, location=None, value: float | None = None):
        super().__init__(message)
        self.location = location
        self.value = value


class ConvergenceFailure(NlkppError):
    """An iterative solve did not reach its tolerance within budget."""


class ConfigError(NlkppError, ValueError):
    """Malformed scenario configuration."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
