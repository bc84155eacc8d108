"""Exception hierarchy.

Two families: ``InputError`` for bad data or configuration (CLI exit 2) and
``NumericalError`` for designs the estimators cannot handle (CLI exit 3).
"""

from __future__ import annotations


class FwlseError(Exception):
    """Base class for every error raised by this package."""


class InputError(FwlseError, ValueError):
    pass


class NumericalError(FwlseError, ArithmeticError):
    pass


class DimensionMismatch(InputError):
    pass


class NonFiniteValue(InputError):
    pass


class RankDeficient(NumericalError):
    """Design matrix has numerical rank below its column count.

    Attributes
    ----------
    column : int
        Index of the first column found to be (numerically) a linear
        combination of the columns before it.
    depends_on : tuple of int
        Earlier columns that enter that combination.
    names : tuple of str or None
        Column names, when the caller supplied them.
    """

    def __init__(self, column, depends_on=(), names=None):
        self.column = column
        self.depends_on = tuple(depends_on)
        self.names = tuple(names) if names is not None else None
        super().__init__(self._message())

    def _message(self):
        def label(j):
            if self.names is not None and j < len(self.names):
                return repr(self.names[j])
            return f"#{j}"

        msg = f"design is rank deficient: column {label(self.column)}"
        if self.depends_on:
            others = ", ".join(label(j) for j in self.depends_on)
            msg += f" is collinear with {others}"
        else:
            msg += " is numerically zero"
        return msg

    def with_names(self, names):
        return RankDeficient(self.column, self.depends_on, names)


class TooFewRows(NumericalError):
    pass


class LeverageOne(NumericalError):
    pass


class DegenerateStratum(NumericalError):
    pass


class MissingClusterId(InputError):
    pass


class SingleClusterWithCorrection(InputError):
    pass


class UnorderedTime(InputError):
    pass


class WeightsTooLong(InputError):
    pass


class InvalidWeights(InputError):
    pass


class UnsupportedKind(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class MissingValue(ParseError):
    pass


class DuplicateHeader(ParseError):
    pass


class ConfigError(InputError):
    pass
