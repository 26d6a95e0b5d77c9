"""Exception types shared by all modules."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class SingularParameterError(DomainError):
    """A parameter sits on a known singularity of a formula."""


class ConvergenceError(RuntimeError):
    """An iterative method failed to reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NumericalFailure(RuntimeError):
    """NaN, blow-up or another unrecoverable numerical event."""


class ContinuationError(ConvergenceError):
    """Continuation stopped; ``V`` is where it failed, ``points`` what was traced."""

    def __init__(self, message, V, points, residual=None, iterations=None):
        super().__init__(message, residual, iterations)
        self.V = V
        self.points = points
