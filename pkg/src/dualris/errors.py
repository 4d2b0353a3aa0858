"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain of a function (bad geometry, non-Hermitian data, ...)."""


class InsufficientHarvest(RuntimeError):
    """A surface cannot harvest its consumption N*mu at the given transmit power.

    ``shortfall`` is the missing power in watts.
    """

    def __init__(self, surface: str, required: float, available: float):
        self.surface = surface
        self.required = float(required)
        self.available = float(available)
        self.shortfall = self.required - self.available
        super().__init__(
            f"{surface}: harvest {self.available:.6g} W < consumption {self.required:.6g} W "
            f"(shortfall {self.shortfall:.6g} W)"
        )


class InfeasibleAtInit(RuntimeError):
    """No starting precoder satisfies the constraints, or a subproblem was certified infeasible."""


class ExperimentInfeasible(RuntimeError):
    """Every realization of an experiment point failed."""
