"""Exception hierarchy shared across the pipeline.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit statuses: 1 for usage/config problems, 2 for bad or
insufficient data, 3 for numerical failures.
"""


class SymidError(Exception):
    """Base class for all package errors."""

    exit_code = 1


# --- usage / configuration (exit code 1) ---------------------------------

class SchemaViolation(SymidError):
    """Config document violates the schema; message names the field path."""

    exit_code = 1

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class PreconditionViolation(SymidError):
    """An operation was called with arguments outside its contract."""

    exit_code = 1


# --- data problems (exit code 2) ------------------------------------------

class DataError(SymidError):
    exit_code = 2


class MissingFile(DataError):
    pass


class MissingColumn(DataError):
    pass


class NonFiniteValue(DataError):
    """A cell failed to parse as a finite number; names row and column."""

    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column {column!r}: not a finite number ({value!r})")


class SeriesTooShort(DataError):
    def __init__(self, length, required):
        self.required = required
        super().__init__(f"series has {length} samples, need at least {required}")


class ConstantSeries(DataError):
    pass


class ZeroLengthFragment(DataError):
    pass


class NoFragments(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class OverlapViolation(DataError):
    """A candidate set references fragments whose index ranges intersect."""


# --- numerical failures (exit code 3) --------------------------------------

class NumericalError(SymidError):
    exit_code = 3


class DivergedTrajectory(NumericalError):
    pass


class DegenerateFragment(NumericalError):
    """All points (numerically) coincide; no axis can be found."""


class RankDeficientAxis(NumericalError):
    """Internal consistency failure: rotation left off-axis residual."""


class SingularTransform(NumericalError):
    pass


class RankDeficient(NumericalError):
    def __init__(self, message, condition=None):
        self.condition = condition
        super().__init__(message)
