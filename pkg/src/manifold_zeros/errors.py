"""Exception types raised by the solver stack."""


class ManifoldZerosError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatch(ManifoldZerosError, ValueError):
    pass


class NonSquare(ShapeMismatch):
    pass


class RankDeficient(ManifoldZerosError, ArithmeticError):
    pass


class NotPositiveDefinite(ManifoldZerosError, ArithmeticError):
    pass


class RetractionFailed(ManifoldZerosError, ArithmeticError):
    pass


class InvalidPoint(ManifoldZerosError, ValueError):
    """A matrix fails the point invariant of its manifold."""


class NotHorizontal(ManifoldZerosError, ValueError):
    pass


class DegenerateDenominator(ManifoldZerosError, ArithmeticError):
    pass


class ConstraintViolated(ManifoldZerosError, ValueError):
    pass


class DivideByZero(ManifoldZerosError, ZeroDivisionError):
    pass
