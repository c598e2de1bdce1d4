"""Exception hierarchy."""


class ConvexUniqError(Exception):
    """Base class for all errors raised by the package."""


class GridError(ConvexUniqError, ValueError):
    """Unsupported resolution or fields living on different grids."""


class ConvexityError(ConvexUniqError, ValueError):
    """A support function whose spherical Hessian is not positive definite."""

    def __init__(self, message, min_eig=None, node=None):
        super().__init__(message)
        self.min_eig = min_eig
        self.node = node


class DomainError(ConvexUniqError, ValueError):
    """Input outside the domain of an operation (non-PD matrix, curvature box, ...)."""


class HypothesisViolated(ConvexUniqError):
    """The curvature condition between two bodies does not hold within tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SolverError(ConvexUniqError, RuntimeError):
    """A linear-algebra step failed to converge or produced an unusable result."""
