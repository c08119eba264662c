"""Exception types shared across the toolkit."""


class RankError(ValueError):
    """A matrix is numerically rank-deficient where an invertible one is required."""


class ObservabilityError(RankError):
    """The requested frequency band cannot be identified from the sampled nodes."""


class InfeasibleError(RuntimeError):
    """No feasible solution exists under the given constraints."""

    def __init__(self, message: str, best_cost: float | None = None):
        super().__init__(message)
        self.best_cost = best_cost
