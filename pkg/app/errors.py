"""
Exception hierarchy. Each error carries the process exit code the CLI maps it to.
"""


class CampError(Exception):
    """Base error for the engine"""
    exit_code: int = 1


class ConfigError(CampError):
    exit_code = 2


class ParameterError(ConfigError):
    """Invalid numeric parameter passed to an engine operation"""


class DataError(CampError):
    exit_code = 3


class LoadError(DataError):
    """A mandatory dataset file is missing or unreadable"""


class FormatError(DataError):
    """A dataset file is malformed"""


class SplitError(DataError):
    pass


class DomainError(DataError):
    """Graph too small for the requested measure"""


class NumericalError(CampError):
    exit_code = 4


class DimensionError(NumericalError):
    def __init__(self, op: str, left: tuple, right: tuple):
        super().__init__(f"{op}: incompatible shapes {left} and {right}")
        self.op = op
        self.left = left
        self.right = right


class ConvergenceError(NumericalError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class TrainingError(NumericalError):
    """Non-finite loss or gradient; aborts the current trial"""


class AggregationError(NumericalError):
    pass
