"""Exception types shared across the package."""


class EprBathError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(EprBathError, ValueError):
    """A parameter is outside its physical or numerical domain."""


class InvalidStateError(EprBathError, ValueError):
    """A state object violates its invariants or lacks required modes."""


class ChannelNotPhysicalError(EprBathError, ValueError):
    """An affine channel produced a covariance matrix violating the
    uncertainty relation.  Carries the offending eigenvalue."""

    def __init__(self, eigenvalue, message=None):
        self.eigenvalue = eigenvalue
        super().__init__(
            message or f"channel output violates the uncertainty relation: "
                       f"offending eigenvalue {eigenvalue:.6e}")


class DegenerateMeasurementError(EprBathError, ValueError):
    """Homodyne conditioning on a quadrature with (near-)zero variance."""


class UndefinedWitnessError(EprBathError, ValueError):
    """EPR witness requested for a state with vanishing mean spin."""


class CapacityError(EprBathError, ValueError):
    """System size exceeds what the chosen representation supports."""


class DegenerateSteadyStateError(EprBathError, RuntimeError):
    """The dissipator has more than one stationary state."""


class CalibrationError(EprBathError, ValueError):
    """Coupling-constant calibration is undefined (vanishing displacement)."""


class ReconstructionError(EprBathError, ValueError):
    """Variance reconstruction is ill-conditioned (vanishing coupling)."""


class StepSizeError(EprBathError, ValueError):
    """Discretization step too coarse for the requested simulation."""


class ConfigError(EprBathError, ValueError):
    """Scenario configuration is malformed or contains unknown keys."""
