"""Exception types shared across the package."""


class SingularSchedule(ValueError):
    """Dephasing-rate denominator vanished (control angle at an exact pole)."""

    def __init__(self, t: float, message: str | None = None):
        self.t = t
        super().__init__(message or f"dephasing schedule is singular at t={t!r}")


class StepSizeUnderflow(RuntimeError):
    """Adaptive controller drove the step size below the hard floor."""


class NotConverged(RuntimeError):
    """Integration reached t_max before the residual stopping criterion."""


class DimensionCap(ValueError):
    """Full-space oracle request exceeds the small-chain safety cap."""


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""
