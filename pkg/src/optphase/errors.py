"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    pass


class DegenerateFilterError(ValueError):
    """Filter transmits (numerically) nothing of the input state."""


class UnsupportedStateError(ValueError):
    """State has a zero amplitude where the filter recursion divides by it."""


class InfeasibleProbabilityError(ValueError):
    """No physical filter reaches the requested success probability."""

    def __init__(self, message, floor=None):
        super().__init__(message)
        self.floor = floor


class NumericalFailure(RuntimeError):
    pass
