"""Exception hierarchy.

Two families: input problems (subclass ``ValueError``, CLI exit code 2) and
numerical failures (CLI exit code 3).
"""


class WeakTailError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(WeakTailError, ValueError):
    pass


class NonPositiveDefinite(ValidationError):
    pass


class DimensionTooLarge(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class ZeroLambda(ValidationError):
    pass


class NotIdenticalLegs(ValidationError):
    pass


class InsufficientData(ValidationError):
    pass


class ConvergenceError(WeakTailError, ArithmeticError):
    pass


class NoConvergence(ConvergenceError):
    pass


class AccuracyUnreachable(ConvergenceError):
    pass


class SequenceNotConverging(ConvergenceError):
    pass
