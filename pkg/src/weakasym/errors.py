"""Exception hierarchy shared by all modules."""


class WeakAsymError(Exception):
    """Base class for library errors."""


class DomainError(WeakAsymError, ValueError):
    """Argument outside the supported domain."""


class SingularConfigurationError(WeakAsymError, ValueError):
    """A kinematic configuration makes a formula singular."""


class DegeneratePointError(WeakAsymError, ValueError):
    """Direction requested at the origin."""


class AmbiguousBoundaryError(WeakAsymError, ValueError):
    """A point on a branch cut was given without a boundary side."""


class AccuracyError(WeakAsymError, RuntimeError):
    """A numerical procedure failed to reach its tolerance.

    The best estimate reached is kept on ``achieved``.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class TaxonomyError(AccuracyError):
    """A kernel has a singularity its tags do not declare."""


class PropagationError(AccuracyError):
    """Coupled-channel propagation lost linear independence."""


class MatchingError(AccuracyError):
    """The asymptotic matching system is ill-conditioned."""

    def __init__(self, message, condition=None):
        super().__init__(message, achieved=condition)
        self.condition = condition
