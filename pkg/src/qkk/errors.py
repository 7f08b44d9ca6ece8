"""Exception hierarchy shared by the simulation modules."""


class PreconditionError(ValueError):
    """An operation was called outside the regime where its contract holds."""


class GridMismatchError(PreconditionError):
    pass


class MinimumPhaseError(PreconditionError):
    """The shifted signal may encircle the origin; KK retrieval is invalid."""


class WeakLocalOscillatorError(PreconditionError):
    """Expected counts per bin are too low for the requested estimator."""


class PhaseUndefinedError(PreconditionError):
    """The number-statistics sum vanishes, so its argument is meaningless."""


class ConvergenceError(PreconditionError):
    """A truncated series cannot meet the requested tail bound."""
