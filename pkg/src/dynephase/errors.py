"""Exception hierarchy.

Validation problems (bad arguments, inconsistent dimensions) derive from
``ValidationError``; failures of a numerical procedure derive from
``NumericError``.  The CLI maps these onto exit codes 1 and 2.
"""


class DynephaseError(Exception):
    """Base class for all package errors."""


class ValidationError(DynephaseError, ValueError):
    pass


class DomainError(ValidationError):
    """Argument outside the mathematical domain of a function."""


class TruncationError(ValidationError):
    """Number-state truncation too small for the requested state."""

    def __init__(self, message, required_truncation=None):
        super().__init__(message)
        self.required_truncation = required_truncation


class NumericError(DynephaseError, ArithmeticError):
    pass


class ConvergenceError(NumericError):
    def __init__(self, message, iterations=None, bound=None):
        super().__init__(message)
        self.iterations = iterations
        self.bound = bound


class IntegrityError(NumericError):
    """A computed quantity violates a structural guarantee (e.g. P(phi) < 0)."""


class StatisticalQualityError(NumericError):
    """Monte Carlo estimate too poorly conditioned to be trusted."""


class DegenerateDistributionError(NumericError):
    """A ratio or normalisation involves a vanishing probability density."""
