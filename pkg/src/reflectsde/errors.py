"""Exception types shared across the library."""


class ReflectSDEError(Exception):
    """Base class for all library errors."""


class NonFiniteInput(ReflectSDEError):
    pass


class ProjectionOutOfReach(ReflectSDEError):
    """Nearest-point projection is not well defined at this distance;
    the caller should shrink the step size."""


class NotOnBoundary(ReflectSDEError):
    pass


class NonUnitVector(ReflectSDEError):
    pass


class TimeOutOfRange(ReflectSDEError):
    pass


class BadTheta(ReflectSDEError):
    pass


class LevelTooDeep(ReflectSDEError):
    pass


class StartOutsideClosure(ReflectSDEError):
    pass


class NonConvergent(ReflectSDEError):
    """Refinement loop exhausted its doubling budget without stabilizing."""


class WindowOutOfRange(ReflectSDEError):
    pass


class DomainMismatch(ReflectSDEError):
    pass


class ConfigError(ReflectSDEError):
    pass


class PathFailureBudgetExceeded(ReflectSDEError):
    pass


class DegenerateFit(ReflectSDEError):
    """All errors are exactly zero; a log-log rate fit is meaningless."""
