"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates an operation's preconditions."""


class InvalidDesignError(InvalidInputError):
    """A design specification is malformed or incomplete."""


class InfeasibleWeightsError(InvalidDesignError):
    """No rollout-period distribution of the requested shape hits the target.

    Carries the feasible treatment-probability range for the shape so the
    caller can pick an attainable p.
    """

    def __init__(self, message: str, p_min: float | None = None, p_max: float | None = None):
        super().__init__(message)
        self.p_min = p_min
        self.p_max = p_max


class UndefinedEstimatorError(RuntimeError):
    """The estimator is undefined for the realized assignment (single group)."""


class AnalyticInvalidError(RuntimeError):
    """Closed-form evaluation preconditions cannot be certified."""


class ResourceLimitError(RuntimeError):
    """An exact enumeration would exceed its atom budget."""
