class TwimputeError(Exception):
    """Base class for every error raised by twimpute"""


class ConfigError(TwimputeError, ValueError):
    """Invalid configuration, model tag, method name or pattern"""


class CsvFormatError(ConfigError):
    """
    A CSV file could not be turned into a panel.

    `row` is the 0-based data row that failed, or None for whole-file problems.
    """

    def __init__(self, message: str, row=None) -> None:
        super().__init__(message)
        self.row = row


class InfeasibleConstraintError(ConfigError):
    """The admissible set is empty. The message names the offending cell."""


class UnsupportedCostError(ConfigError):
    pass


class NumericalError(TwimputeError, ArithmeticError):
    """Base class for numerical failures (CLI exit code 3)"""


class SingularSubproblemError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message: str, iterations: int, residual: float) -> None:
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
