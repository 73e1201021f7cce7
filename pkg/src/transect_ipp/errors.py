"""Exception hierarchy.

Every error raised by the library derives from :class:`TransectError` so
callers (and the CLI) can catch one base class and map subclasses to exit
codes.
"""


class TransectError(Exception):
    """Base class for all library errors."""


class SingularSystem(TransectError, ArithmeticError):
    """A covariance matrix could not be factorized even after jitter."""


class OverlappingSets(TransectError, ValueError):
    """Two location sets that must be disjoint share a location."""


class InvalidArity(TransectError, ValueError):
    """Robot count ``k`` is outside ``[1, r]``."""


class OutOfRange(TransectError, IndexError):
    """A column or row index falls outside the grid."""


class BudgetExceeded(TransectError):
    """The requested enumeration exceeds the configured budget guard."""


class NoUnobserved(TransectError, ValueError):
    """Every location is sampled (``k == r``), so nothing is left unobserved."""


class UnknownWindow(TransectError, KeyError):
    """A window is not a key of the value table."""


class DegenerateNoise(TransectError, ArithmeticError):
    """Loss bound is undefined for a zero noise-to-signal ratio."""


class ZeroMeanField(TransectError, ArithmeticError):
    """Relative error normalization is undefined for a zero-mean truth."""


class TooLarge(TransectError, ValueError):
    """Grid too large for dense covariance sampling."""


class SearchFailed(TransectError, ArithmeticError):
    """Every candidate of the likelihood search was numerically singular."""


class ParseError(TransectError, ValueError):
    """Malformed field or path file."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class DimensionMismatch(TransectError, ValueError):
    """Array or file dimensions disagree with the grid."""
