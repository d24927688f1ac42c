"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
PreconditionError -> 4.
"""


class UvarError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(UvarError):
    """Invalid run configuration (unknown key, bad value, missing section)."""


class DataError(UvarError):
    """Malformed input data (dimension mismatch, unparseable cell, missing column)."""


class PreconditionError(UvarError):
    """A numerical precondition of an estimator is violated for the given input."""


class SingularDesignError(PreconditionError):
    """The population cross-moment matrix is not numerically positive definite."""

    def __init__(self, pivot_index: int, pivot_value: float, tolerance: float):
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value
        self.tolerance = tolerance
        super().__init__(
            f"cross-moment factorization failed: pivot {pivot_index} is "
            f"{pivot_value:.3e}, below tolerance {tolerance:.3e}"
        )
