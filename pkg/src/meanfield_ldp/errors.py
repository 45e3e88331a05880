"""Exception hierarchy shared across the library."""


class DomainError(ValueError):
    """An input violates a documented precondition (bad measure, bad map, bad shape)."""


class AbsoluteContinuityError(DomainError):
    """A required absolute-continuity relation fails; the associated infimum is +inf."""

    def __init__(self, message):
        super().__init__(message)
        self.infimum = float("inf")


class CapacityError(RuntimeError):
    """The instance is larger than an exact/enumerative routine is willing to handle."""


class ConvergenceError(RuntimeError):
    """A fixed-point iteration did not reach its tolerance; carries the last residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class TrajectoryDivergedError(RuntimeError):
    """A simulated trajectory left the representable range (exploding drift)."""

    def __init__(self, message, stage, particle=None):
        super().__init__(message)
        self.stage = stage
        self.particle = particle


class ConfigError(ValueError):
    """A run configuration file is malformed or references unknown builtins."""
