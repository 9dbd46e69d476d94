"""Exception types shared across the package."""


class HjbkitError(Exception):
    pass


class ParameterError(HjbkitError, ValueError):
    """Invalid parameter value."""


class CoefficientError(HjbkitError):
    """A coefficient map returned a non-finite value on a finite input."""

    def __init__(self, name, y, delta=None):
        self.name = name
        self.y = y
        self.delta = delta
        at = f"y={y!r}" if delta is None else f"y={y!r}, delta={delta!r}"
        super().__init__(f"coefficient {name!r} is non-finite at {at}")


class StabilityError(HjbkitError):
    """Explicit time step violates the stability (CFL) condition."""

    def __init__(self, dt, dt_max, min_steps):
        self.dt = dt
        self.dt_max = dt_max
        self.min_steps = min_steps
        super().__init__(
            f"time step {dt:g} exceeds the stability limit {dt_max:g}; "
            f"use at least {min_steps} steps"
        )


class DivergenceError(HjbkitError):
    """The long-time march or an estimator blew past the overflow guard.

    Typically the discounted reward is not integrable over an infinite
    horizon for this model (discount rate too weak for the reward growth).
    """


class PathExclusionError(HjbkitError):
    """Too many simulated paths went non-finite to trust the estimate."""

    def __init__(self, excluded, total):
        self.excluded = excluded
        self.total = total
        super().__init__(
            f"{excluded} of {total} paths excluded (> 0.1% budget); "
            "the model likely overflows under this policy"
        )
