"""Exception types raised across the package."""


class EdgeBurstError(Exception):
    """Base class for all package errors."""


class DomainError(EdgeBurstError, ValueError):
    """An argument lies outside the domain of the operation."""


class GeometryError(EdgeBurstError, ValueError):
    """Lattice geometry does not match the model or the requested sites."""


class SlowDecayError(EdgeBurstError):
    """The time horizon was exhausted before the norm dropped below the floor.

    This is the signature of a closed imaginary gap: the norm decays
    algebraically and a finite ``t_max`` leaves a sizeable remainder.

    Attributes
    ----------
    norm2 : float
        Largest squared norm left over when integration stopped.
    time : float
        Time reached.
    state : LatticeState or None
        Final state (single-trajectory runs only).
    profile : LossProfile or None
        Partial loss profile accumulated up to ``time``, when available.
    """

    def __init__(self, norm2, time, state=None, profile=None):
        self.norm2 = float(norm2)
        self.time = float(time)
        self.state = state
        self.profile = profile
        super().__init__(
            f"t_max={time:g} reached with norm^2={norm2:.3e} above the norm floor; "
            "raise t_max or accept a larger truncation error"
        )


class CoalescentRootsError(EdgeBurstError):
    """beta_L and beta_R coincide at eta = 0; use the eta -> 0+ extrapolation."""


class FitError(EdgeBurstError, ValueError):
    """Data unsuitable for the requested fit."""


class ConfigError(EdgeBurstError, ValueError):
    """Experiment configuration failed validation."""
