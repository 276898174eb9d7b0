"""Exception types shared across the package."""


class DataValidationError(ValueError):
    """Raised when input data violate a documented precondition."""


class NumericalError(RuntimeError):
    """Raised on numerical failure (singular factorization, ill-conditioning)."""


class IllConditionedError(NumericalError):
    """Raised when a matrix is too ill-conditioned to invert reliably."""

    def __init__(self, message, condition_estimate):
        super().__init__(f"{message} (condition estimate {condition_estimate:.3e})")
        self.condition_estimate = condition_estimate
