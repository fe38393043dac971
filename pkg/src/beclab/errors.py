"""Exception and warning types.

Two families: ``ValidationError`` for bad inputs or requests outside the
domain of a formula, ``NumericalFailure`` for algorithms that did not reach
their tolerance.  The CLI maps them to exit codes 2 and 3.
"""


class BecLabError(Exception):
    """Base class for all package errors."""


class ValidationError(BecLabError, ValueError):
    pass


class NumericalFailure(BecLabError, ArithmeticError):
    pass


class ConfigError(ValidationError):
    """Configuration error tied to a dotted field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class BadGrid(ValidationError):
    pass


class NotApplicable(ValidationError):
    pass


class InvalidForProfile(ValidationError):
    pass


class NotHermitian(ValidationError):
    pass


class ImZZero(ValidationError):
    pass


class BoundaryCaseImZZero(ValidationError):
    pass


class GaplessPoint(NumericalFailure):
    pass


class QuadratureDivergence(NumericalFailure):
    pass


class DegenerateLoop(NumericalFailure):
    pass


class EigensolverFailure(NumericalFailure):
    pass


class IllConditionedBC(NumericalFailure):
    pass


class TangentialCrossing(NumericalFailure):
    pass


class AmbiguousLink(UserWarning):
    """Two continuation candidates with nearly equal overlap."""
