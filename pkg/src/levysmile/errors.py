"""Exception and warning types shared across the library."""


class SmileError(Exception):
    """Base class for all library-specific failures."""


class DomainError(SmileError, ValueError):
    """An argument left the mathematical domain of the operation.

    Typical cause: requesting a moment/tilt outside the interval where the
    exponential moment of the terminal log-return is finite.
    """


class ConvergenceError(SmileError, RuntimeError):
    """An iterative solver exhausted its iteration budget."""


class UnsupportedModelError(SmileError, TypeError):
    """The operation has no implementation for the given model."""


class SingularityError(SmileError, ValueError):
    """Evaluation requested inside a guard band around a genuine pole."""


class TruncationError(SmileError, RuntimeError):
    """The integrand has not decayed enough at the truncation point."""


class NoSolutionError(SmileError, ValueError):
    """Implied-volatility inversion target lies outside arbitrage bounds."""


class InsufficientDataError(SmileError, ValueError):
    """Too few quotes/strikes for the requested operation."""


class DegenerateRegressionError(SmileError, ValueError):
    """Regression inputs are collinear or otherwise rank-deficient."""


class OptimizerFailureError(SmileError, RuntimeError):
    """A calibration slice failed to converge."""


class ApproximationWarning(UserWarning):
    """Emitted when a closed-form approximation is used outside its
    documented accuracy range (e.g. tempered-stable exponent above 0.5)."""
