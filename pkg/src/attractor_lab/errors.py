"""Exception types raised across the package."""


class AttractorLabError(Exception):
    pass


class Unsupported(AttractorLabError):
    """The requested operation is not available for this driver family."""


class InconclusiveFit(AttractorLabError):
    """Neither decay model fits the cocycle tail well enough to decide."""


class DivergentTail(AttractorLabError):
    """An improper integral required to be finite does not converge."""


class NegativeInitialCondition(AttractorLabError):
    pass


class NotConverged(AttractorLabError):
    pass


class StepTooLarge(AttractorLabError):
    """Time step violates the bound that keeps the scheme order preserving."""


class HeterogeneousProfile(AttractorLabError):
    pass


class MonotonicityViolation(AttractorLabError):
    """A pullback iterate grew with the horizon, which points at a scheme bug."""


class PreconditionFailed(AttractorLabError):
    pass


class ConfigError(AttractorLabError):
    pass
