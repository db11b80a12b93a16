"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for validation problems, 3 for numerical degeneracy, 4 for I/O.
"""

from __future__ import annotations


class AgcmError(Exception):
    exit_code = 1


class ValidationError(AgcmError, ValueError):
    exit_code = 2


class NumericError(AgcmError, ArithmeticError):
    exit_code = 3


class IoError(AgcmError, OSError):
    exit_code = 4


# -- validation ---------------------------------------------------------------


class RankDeficient(ValidationError):
    def __init__(self, block: str | int, rank: int, cols: int):
        self.block = block
        self.rank = rank
        self.cols = cols
        super().__init__(f"block {block!r} is rank deficient: rank {rank} < {cols} columns")


class NotOrthogonal(ValidationError):
    def __init__(self, i: int, j: int, max_abs: float):
        self.i = i
        self.j = j
        self.max_abs = max_abs
        super().__init__(
            f"design blocks {i} and {j} are not orthogonal: max |X_i'X_j| = {max_abs:.3e}"
        )


class InsufficientResidualDof(ValidationError):
    def __init__(self, r: int, p: int):
        self.r = r
        self.p = p
        super().__init__(f"residual degrees of freedom r = {r} is smaller than p = {p}")


class MixedTimepoints(ValidationError):
    pass


class DegenerateTimepoints(ValidationError):
    pass


class EmptyDesign(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class InvalidCorrelation(ValidationError):
    def __init__(self, rho: float):
        self.rho = rho
        super().__init__(f"serial correlation must lie in [0, 1), got {rho!r}")


class SizeLimit(ValidationError):
    def __init__(self, size: int, limit: int):
        self.size = size
        self.limit = limit
        super().__init__(f"n*p = {size} exceeds the vec-form size limit {limit}")


class MissingValue(ValidationError):
    def __init__(self, row: int, col: str):
        self.row = row
        self.col = col
        super().__init__(f"missing value at data row {row}, column {col!r}")


class NonNumeric(ValidationError):
    def __init__(self, row: int, col: str, text: str):
        self.row = row
        self.col = col
        self.text = text
        super().__init__(f"non-numeric value {text!r} at row {row}, column {col!r}")


class UnsortedTimepoints(ValidationError):
    pass


class EmptyGroup(ValidationError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"group {label!r} has no rows")


# -- numerics -----------------------------------------------------------------


class NotPositiveDefinite(NumericError):
    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (failing pivot {pivot})")


class DegenerateCovariance(NumericError):
    pass


class IllConditionedProfile(NumericError):
    pass


class NonpositiveRmss(NumericError):
    def __init__(self, rmss: float):
        self.rmss = rmss
        super().__init__(f"RMSS must be positive to take its logarithm, got {rmss!r}")


class NonsingularityViolated(NumericError):
    def __init__(self, which: str):
        self.which = which
        super().__init__(f"standardizer {which} is singular")


class ExperimentUnstable(NumericError):
    def __init__(self, failures: int, total: int):
        self.failures = failures
        self.total = total
        super().__init__(f"{failures} of {total} replications failed (limit 1%)")
