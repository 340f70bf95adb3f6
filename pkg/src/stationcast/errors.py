"""Exception hierarchy shared across the package.

The CLI maps each family onto an exit code: validation problems exit 2,
data problems exit 3 and numerical divergence exits 4.
"""


class StationcastError(Exception):
    exit_code = 1


class ValidationError(StationcastError, ValueError):
    """Bad user input or configuration."""

    exit_code = 2


class ConfigurationError(ValidationError):
    pass


class DimensionError(ValidationError):
    """Array shapes do not satisfy an operation's contract."""


class ContractError(ValidationError):
    pass


class GeometryError(ValidationError):
    pass


class DataError(StationcastError):
    """Input files are malformed or inconsistent."""

    exit_code = 3


class IngestionError(DataError):
    pass


class EvaluationError(DataError):
    pass


class UnsupportedLeadError(ValidationError):
    pass


class NumericalError(StationcastError, ArithmeticError):
    """NaN or Inf appeared where finite values are required."""

    exit_code = 4


class DivergenceError(NumericalError):
    pass
