"""Exception types raised across the package."""


class WarpcheckError(Exception):
    """Base class for all package errors."""


class NotSemiConcave(WarpcheckError):
    pass


class PreconditionFailed(WarpcheckError):
    pass


class NothingToGlue(WarpcheckError):
    pass


class TooCloseToBoundary(WarpcheckError):
    pass


class NoZeroCrossing(WarpcheckError):
    pass


class OutOfRange(WarpcheckError):
    pass


class GridTooCoarse(WarpcheckError):
    pass


class NotApplicable(WarpcheckError):
    pass


class PartitionMismatch(WarpcheckError):
    pass


class ShootingDiverged(WarpcheckError):
    pass


class EmptySet(WarpcheckError):
    pass


class SingularWeight(WarpcheckError):
    pass


class NeedsSmoothness(WarpcheckError):
    pass


class ConvergenceFailure(WarpcheckError):
    pass


class SupportViolation(WarpcheckError):
    pass


class NonSeparable(WarpcheckError):
    pass


class SchemaError(WarpcheckError):
    """Scenario validation failure; ``path`` is a JSONPath-like pointer."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class DegeneratePoint(WarpcheckError):
    pass
