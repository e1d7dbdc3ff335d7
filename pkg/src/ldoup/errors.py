"""Exception types raised across the package."""


class LdoupError(Exception):
    """Base class for all package errors."""


class ParameterError(LdoupError, ValueError):
    """Invalid parameters; ``violations`` lists every broken constraint."""

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{v.code}: {v.message}" for v in self.violations)
        super().__init__(msg or "invalid parameters")


class DimensionUnsupportedError(LdoupError):
    pass


class QuadratureNotConvergedError(LdoupError):
    pass


class MassDeficitError(LdoupError):
    """Fourier inversion produced a grid whose mass is far from one."""

    def __init__(self, mass):
        self.mass = mass
        super().__init__(f"inverted density has mass {mass:.6g}, outside [0.99, 1.01]")


class StepTooCoarseError(LdoupError):
    pass


class NoRepeatedLineError(LdoupError):
    pass


class OptimizerFailedError(LdoupError):
    def __init__(self, message, stage_trace=None):
        self.stage_trace = list(stage_trace or [])
        super().__init__(message)


class ConstraintInfeasibleError(LdoupError):
    pass


class DegenerateSeriesError(LdoupError, ValueError):
    """Raised for series with zero variance (ACF undefined)."""
