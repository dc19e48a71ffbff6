"""Exception types raised across the package."""

from numpy.linalg import LinAlgError


class PrecaugError(Exception):
    """Base class for package errors."""


class DimensionMismatch(PrecaugError, ValueError):
    pass


class SingularShift(PrecaugError, LinAlgError):
    """``C + shift`` is not numerically positive definite."""


class SingularM(PrecaugError, LinAlgError):
    """``alpha * Lambda_G / a_g + lam * I`` is singular (lam = 0 with singular Lambda_G)."""


class DegenerateDenominator(PrecaugError, ArithmeticError):
    pass


class NoConvergence(PrecaugError, RuntimeError):
    pass


class InvalidRegime(PrecaugError, ValueError):
    """The requested quantity only exists for d < n (or d < n - 1)."""


class InvalidSpec(PrecaugError, ValueError):
    pass


class InvalidScheme(PrecaugError, ValueError):
    pass


class SingularSigma(PrecaugError, LinAlgError):
    pass


class DegenerateCluster(PrecaugError, RuntimeError):
    pass


class ConfigError(PrecaugError, ValueError):
    pass


class ParseError(PrecaugError, ValueError):
    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.row = row
        self.column = column


class NonFinite(ParseError):
    """A parsed value is NaN or infinite."""
