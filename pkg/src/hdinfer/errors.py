"""Exception hierarchy.

Two families matter to callers: data problems (bad files, mismatched names)
and numeric failures inside a fit. The CLI maps them to exit codes 3 and 4.
"""


class HdInferError(Exception):
    pass


class DataValidationError(HdInferError):
    pass


class MissingValue(DataValidationError):
    pass


class DimensionMismatch(DataValidationError):
    pass


class NonBinaryResponse(DataValidationError):
    pass


class DuplicateColname(DataValidationError):
    pass


class DegenerateColumn(DataValidationError):
    pass


class DuplicatePosition(DataValidationError):
    pass


class TreeDatasetMismatch(DataValidationError):
    pass


class UnknownColname(DataValidationError):
    pass


class ColumnUniverseMismatch(DataValidationError):
    pass


class NumericError(HdInferError):
    pass


class NonConvergence(NumericError):
    pass


class PerfectSeparation(NumericError):
    pass


class Separation(NumericError):
    pass


class DegenerateFit(NumericError):
    pass


class NegativeDeviance(NumericError):
    pass


class EmptyInput(HdInferError, ValueError):
    pass
