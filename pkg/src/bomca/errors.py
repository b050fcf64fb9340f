"""Exception hierarchy shared by all bomca modules."""


class BomcaError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteError(BomcaError):
    """A NaN or Inf appeared where only finite complex values are allowed."""


class JetOrderMismatchError(BomcaError):
    """Binary jet operation applied to jets of different truncation order."""


class PoleProximityError(BomcaError):
    """Evaluation point too close to a singularity of the potential.

    Carries the offending position and its distance to the nearest pole so
    callers can decide whether to reject or merely flag a trajectory.
    """

    def __init__(self, x, distance, clearance):
        self.x = x
        self.distance = distance
        self.clearance = clearance
        super().__init__(
            f"point {x} is {distance:.3e} from a pole (clearance {clearance:.3e})"
        )


class StepSizeUnderflowError(BomcaError):
    """Adaptive step fell below h_min; typically a pole capture."""


class MaxStepsExceededError(BomcaError):
    """Integration did not reach the final time within the step budget."""


class ActionOverflowError(BomcaError):
    """|Im S|/hbar left the range where exp(iS/hbar) is representable."""


class NewtonError(BomcaError):
    """Base class for root-finder failures."""


class NoConvergenceError(NewtonError):
    """Newton iteration exhausted its budget without meeting the residual tolerance."""


class LeftRegionError(NewtonError):
    """Newton iterate wandered outside the search region plus margin."""


class DegenerateJacobianError(NewtonError):
    """|M| below the focal tolerance; the trajectory-to-position map is singular here."""


class GridMismatchError(BomcaError):
    """Wavefunction operands do not share the same position grid."""


class EmptyRegionError(BomcaError):
    """A comparison region contains no usable grid points."""


class NyquistViolationError(BomcaError):
    """Grid spacing cannot represent the wavepacket's momentum content."""


class EdgeContaminationError(BomcaError):
    """Wavefunction amplitude reached the grid edges; periodic wraparound would corrupt the result."""


class SplitPointContaminatedError(BomcaError):
    """Transmission split point carries non-negligible amplitude."""


class ConfigError(BomcaError):
    """Experiment configuration failed validation; message names the offending field."""
