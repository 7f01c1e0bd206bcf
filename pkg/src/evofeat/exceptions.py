"""Exception types raised across the package."""


class EvofeatError(Exception):
    """Base class for all package-specific errors."""


# --- grammar / genotype ---------------------------------------------------

class GrammarError(EvofeatError):
    pass


class UndefinedNonterminalError(GrammarError):
    pass


class DuplicateDefinitionError(GrammarError):
    pass


class EmptyProductionError(GrammarError):
    pass


class UnsatisfiableDepthError(GrammarError):
    pass


class InvalidGeneError(GrammarError):
    pass


class GrammarMismatchError(GrammarError):
    pass


# --- expressions ----------------------------------------------------------

class ExpressionSyntaxError(EvofeatError):
    """Malformed feature expression text.

    Carries the 0-based character ``position`` where parsing failed.
    """

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ColumnOutOfRangeError(EvofeatError):
    pass


# --- datasets ---------------------------------------------------------------

class MissingLabelColumnError(EvofeatError):
    pass


class NonNumericCellError(EvofeatError):
    """A feature cell could not be parsed as a number.

    ``row`` is the 1-based data row (header excluded), ``column`` the column name.
    """

    def __init__(self, row, column, value):
        super().__init__(f"non-numeric value {value!r} in column {column!r}, row {row}")
        self.row = row
        self.column = column


class EmptyFileError(EvofeatError):
    pass


class ClassTooSmallError(EvofeatError):
    pass


# --- models -----------------------------------------------------------------

class EmptyTrainingSetError(EvofeatError):
    pass


class MulticlassUnsupportedError(EvofeatError):
    pass


class SingleClassTruthError(EvofeatError):
    pass


# --- baselines ----------------------------------------------------------------

class KTooLargeError(EvofeatError):
    pass


class DivergenceDetectedError(EvofeatError):
    pass


# --- campaign / CLI -----------------------------------------------------------

class ConfigInvalidError(EvofeatError):
    pass


class UnknownTesterError(EvofeatError):
    pass


class NoCompletedRunsError(EvofeatError):
    pass
