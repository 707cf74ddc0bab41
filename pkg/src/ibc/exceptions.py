"""Exception and warning types shared across the package."""


class IBCError(Exception):
    """Base class for errors raised by this package."""


class StructureError(IBCError):
    """A model falls outside the affine/quadratic-in-control class, or a
    matrix that must be positive semidefinite is not."""


class DegenerateObservationError(IBCError):
    """Innovation variance is not strictly positive."""


class ConvergenceError(IBCError):
    """An iterative procedure did not converge.

    ``best`` carries the best iterate found so far (may be ``None``).
    """

    def __init__(self, message, best=None, details=None):
        super().__init__(message)
        self.best = best
        self.details = details or {}


class NoSolutionError(IBCError):
    """A requested target cannot be reached; ``trace`` holds diagnostics."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class DegenerateSamplesError(IBCError):
    """All observation samples coincide; the entropy estimate is meaningless."""


class NoInformationError(IBCError):
    """The first control of Example 1 carries no information (u0 = 0)."""


class ConfigError(IBCError):
    """Invalid experiment configuration."""


class PlanningError(IBCError):
    """Receding-horizon planning aborted; ``trace`` holds the partial run."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class BoundaryMinimumWarning(UserWarning):
    """The best grid point lies on the boundary of the search interval."""
