"""Exception hierarchy shared by every module.

Each class carries a process exit code so the CLI can map failures to a
stable, documented status without a lookup table scattered across commands.
"""

from __future__ import annotations


class FredoError(Exception):
    exit_code = 1


class MissingFile(FredoError):
    exit_code = 3

    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"no such file: {self.path}")


class ParseError(FredoError):
    """A CSV cell that is not a real number.

    ``row`` is the 1-based data row (header excluded) and ``col`` the 1-based
    column position in the file.
    """

    exit_code = 4

    def __init__(self, row: int, col: int, value: str = ""):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"cannot parse {value!r} as a number at row {row}, col {col}")


class EmptyDataset(FredoError):
    exit_code = 4


class ConfigError(FredoError):
    exit_code = 5


class DegenerateSplit(FredoError):
    exit_code = 6


class ConstantSeries(FredoError):
    exit_code = 6

    def __init__(self, series: int):
        self.series = series
        super().__init__(f"series {series} has zero variance on the training split")


class ShapeMismatch(FredoError):
    exit_code = 7


class LengthMismatch(ShapeMismatch):
    exit_code = 7


class TooShort(FredoError):
    exit_code = 6


class EmptyInput(FredoError):
    exit_code = 7


class NoFeasibleCandidate(FredoError):
    exit_code = 6


class NoForwardCache(FredoError):
    exit_code = 7


class EmptyTrainingSet(FredoError):
    exit_code = 6


class NonFiniteLoss(FredoError):
    exit_code = 8


class TooFewPairs(FredoError):
    exit_code = 9


class ZeroVarianceDifferences(FredoError):
    exit_code = 9


class OutputLocked(FredoError):
    exit_code = 10


class InvariantViolation(FredoError):
    exit_code = 12
