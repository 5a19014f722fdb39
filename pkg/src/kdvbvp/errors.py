"""Exception hierarchy shared by every solver stage."""


class KdVError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""


class ConfigInvalid(KdVError):
    pass


class NoClassMatch(KdVError):
    pass


class AmbiguousClass(KdVError):
    """Raised only if the hypothesis sets stop being mutually exclusive (a bug)."""


class GridTooCoarse(KdVError):
    pass


class DegenerateKernel(KdVError):
    pass


class QuadratureNotConverged(KdVError):
    pass


class PadExceeded(KdVError):
    pass


class IncompatibleData(KdVError):
    pass


class ThetaUnderflow(KdVError):
    pass


class ContractionFailed(KdVError):
    pass


class SingularBoundarySystem(KdVError):
    pass


class UnresolvedSignal(KdVError):
    pass


class ExcludedSobolevIndex(KdVError):
    """s sits on a compatibility threshold (2j-1)/2 that the theory excludes."""
