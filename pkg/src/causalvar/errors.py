"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 1 for usage/contract
problems, 2 for data problems (including misclassified structures), 3 for
numerical failures.
"""

from __future__ import annotations


class CausalVarError(Exception):
    exit_code = 3


class ContractError(CausalVarError, ValueError):
    """A caller violated an operation's preconditions."""

    exit_code = 1


class DataError(CausalVarError):
    exit_code = 2


class SchemaError(DataError):
    pass


class IngestionError(DataError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class DegenerateSeriesError(DataError):
    pass


class DegreesOfFreedomError(DataError):
    pass


class EstimationError(DataError):
    pass


class DegenerateVarianceError(DataError):
    def __init__(self, message: str, variable: str | None = None):
        super().__init__(message)
        self.variable = variable


class ContradictionError(DataError):
    pass


class MisclassificationError(DataError):
    pass


class NumericalError(CausalVarError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class StationarityError(NumericalError):
    def __init__(self, message: str, radius: float | None = None):
        super().__init__(message)
        self.radius = radius


class StructuralSingularityError(NumericalError):
    pass


class DegeneracyError(NumericalError):
    pass


class GenerationError(NumericalError):
    pass


class MisclassificationWarning(UserWarning):
    pass


class ConsistencyWarning(UserWarning):
    pass


class ConfigWarning(UserWarning):
    pass
