"""Exception hierarchy shared by the simulator, estimators and tracker."""


class SensingError(Exception):
    """Base class for every error raised by isac6d."""


class DegenerateDirection(SensingError):
    """Azimuth is undefined (pitch at +/-90 deg, or sin(theta) ~ 0 for omega_theta)."""


class OutOfRange(SensingError):
    """A spatial-domain value left [-1, 1] by more than the clipping band."""


class StateEscaped(SensingError):
    """A propagated target state left the service area."""


class AllNoise(SensingError):
    """Model-order selection found no signal component."""


class SingularBlock(SensingError):
    """The ESPRIT eigenvector block to be inverted is numerically singular."""


class AmbiguousRange(SensingError):
    """The distance phase wrapped; the estimate would alias."""


class RankDeficient(SensingError):
    """Plane fit has fewer than three independent support points."""


class TooManyInvalidCells(SensingError):
    """More than the tolerated fraction of virtual-velocity cells failed."""


class TargetLost(SensingError):
    """Single-shot sensing could not detect the illuminated target."""


class InvalidObservation(SensingError):
    """An observation with invalid fields was offered where a full one is required."""


class SingularInnovation(SensingError):
    """Kalman innovation covariance is too ill-conditioned to invert."""
