"""Exception and warning types shared across the package."""


class HartreeLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HartreeLabError, ValueError):
    """Invalid grid, solver, or lattice configuration."""


class PreconditionError(HartreeLabError, ValueError):
    """An operation was called on inputs that violate its stated hypotheses."""


class GridTooSmallError(HartreeLabError):
    """The grid cannot resolve the requested states to tolerance."""


class GridTooLargeError(ConfigurationError):
    """Lattice exceeds the pair-count guard of the direct Coulomb sum."""


class RegimeBoundaryError(PreconditionError):
    """Frequency sits on (or numerically at) a threshold where a construction degenerates."""


class ConvergenceError(HartreeLabError):
    """An iterative method failed to reach its tolerance."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class RegimeWarning(UserWarning):
    """Frequency lies outside the interval where a result is proven."""


class ConditioningWarning(UserWarning):
    """Closed-form coefficients are numerically stiff near a threshold."""


class TruncationWarning(UserWarning):
    """Field has not decayed at the end of the computational domain."""
