"""Exception hierarchy.

The CLI maps these onto exit codes: configuration problems exit 2,
numerical failures exit 3 and audit failures exit 4.
"""


class PhsError(Exception):
    """Base class for all errors raised by phs_lab."""


class DimensionError(PhsError, ValueError):
    """Vector or matrix shapes do not match the system definition."""


class DomainError(PhsError, ValueError):
    """A state lies outside the physical domain of a model (e.g. V <= 0)."""


class NumericalError(PhsError, ArithmeticError):
    """Base class for numerical failures."""


class NonFiniteError(NumericalError):
    """A gradient, input or state evaluated to inf/nan."""


class BlowUpError(NumericalError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class SingularMatrixError(NumericalError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConvergenceError(NumericalError):
    """Newton iteration failed; ``best`` holds the best iterate found."""

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class ScheduleError(NumericalError):
    """A cycle schedule cannot be realized by the model (missed target, divergence)."""


class ConfigError(PhsError):
    """Invalid or incomplete scenario configuration."""


class AuditFailure(PhsError):
    """An invariant audit did not pass."""
