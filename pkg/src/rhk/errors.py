"""Exception hierarchy shared by all modules."""


class RHKError(Exception):
    """Base class; ``module`` records where in the pipeline the failure happened."""

    module = "rhk"


class ValidationError(RHKError):
    module = "monodromy"


class RejectsIdentityProductViolation(ValidationError):
    pass


class RejectsDisconnected(ValidationError):
    pass


class RejectsDiagonalizable(ValidationError):
    pass


class InconsistentBranchData(ValidationError):
    pass


class SingularSystem(RHKError):
    module = "monodromy"


class UnsupportedTopology(RHKError):
    module = "covering"


class NearDegenerateCurve(RHKError):
    module = "surface"


class PathThroughBranchPoint(RHKError):
    module = "surface"


class StepSizeUnderflow(RHKError):
    module = "surface"


class NotPositiveDefinite(RHKError):
    module = "theta"


class TruncationOverflow(RHKError):
    module = "theta"


class NoneFound(RHKError):
    module = "theta"


class SingularCharacteristic(RHKError):
    module = "kernels"


class ThetaDivisorHit(RHKError):
    """Theta factor vanishes: the data sit on (or next to) the Malgrange divisor."""

    module = "kernels"

    def __init__(self, msg, ratio=None):
        super().__init__(msg)
        self.ratio = ratio


class ExtrapolationUnstable(RHKError):
    module = "kernels"


class ContinuationDrift(RHKError):
    module = "rhp"


class PathThroughSingularity(RHKError):
    module = "rhp"


class FiniteDifferenceUnstable(RHKError):
    module = "isomono"


class ContourTooClose(RHKError):
    module = "isomono"


class UnsupportedGeometry(RHKError):
    module = "isomono"
