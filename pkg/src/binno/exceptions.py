"""Exception types shared across the package."""


class BinnoError(Exception):
    """Base class for all package-specific errors."""


class SvdConvergenceError(BinnoError, RuntimeError):
    """SVD backend failed to converge on the given matrix."""


class EmptyIntervalError(BinnoError, RuntimeError):
    """A combination-weight interval is empty (lower endpoint > upper)."""


class NoDescentWeightError(BinnoError, RuntimeError):
    """No candidate weight pair certified simultaneous objective descent.

    The caller is expected to shrink the stepsize and retry.
    """


class DegenerateDenominatorError(BinnoError, ArithmeticError):
    """A stepsize lower-bound formula has a zero denominator.

    Happens when every regularizer weight entering the bound is zero; the
    caller must supply a stepsize explicitly.
    """


class ZeroReferenceError(BinnoError, ValueError):
    """Relative error is undefined because the reference matrix is zero."""


class MatrixParseError(BinnoError, ValueError):
    """A matrix file (CSV or PGM) is malformed.

    ``line`` holds the 1-based offending line for CSV input when known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
