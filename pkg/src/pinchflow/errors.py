"""Exception types raised by pinchflow operations."""


class PinchflowError(Exception):
    """Base class for all pinchflow errors."""


class ZeroMeanCurvature(PinchflowError):
    """|H| is at or below the configured floor; the principal normal is undefined."""


class DimensionTooSmall(PinchflowError):
    """Operation requires a larger intrinsic dimension (the sharp pinching constant needs n >= 5)."""


class NotPinched(PinchflowError):
    """Pointwise data violates Q <= 0, so the pinched reaction bound does not apply."""


class NotCodazzi(PinchflowError):
    """Gradient tensor is not fully symmetric in its tangent slots."""


class InfeasibleParams(PinchflowError):
    """No pinched data can exist for the requested parameters (needs c > 1/n)."""


class UnknownProperty(PinchflowError):
    """Verification property id is not recognised."""


class BadSpec(PinchflowError):
    """Model-flow specification is inconsistent (dimensions, radii, codimension)."""


class TimeBeyondSingularity(PinchflowError):
    """Requested time at or beyond the singular time of the exact solution."""


class BadResolution(PinchflowError):
    """Grid resolution is too coarse or not even."""


class DegenerateMetric(PinchflowError):
    """Induced metric is numerically singular at some grid point."""


class StepTooSmall(PinchflowError):
    """Time step collapsed below the hard floor before any progress was made."""


class InsufficientData(PinchflowError):
    """Trajectory has too few samples for singularity-type classification."""


class EmptySchedule(PinchflowError):
    """Rescaling schedule contains no times."""


class UsageError(PinchflowError):
    """Bad command line or configuration input."""
