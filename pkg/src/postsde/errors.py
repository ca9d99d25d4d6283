"""Exception types shared across the package."""


class PostSDEError(Exception):
    pass


class DomainError(PostSDEError, ValueError):
    """A potential or drift was evaluated where it is not finite."""


class NewtonError(PostSDEError):
    """Newton iteration did not reach the residual tolerance."""

    def __init__(self, message, residual_norm=float("nan"), iterations=0, factorizations=0):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations
        self.factorizations = factorizations


class FactorizationError(PostSDEError):
    """Zero pivot met while factorizing a Jacobian."""

    residual_norm = float("nan")
    iterations = 0
    factorizations = 0


class StepFailure(PostSDEError):
    """A scheme step could not be completed (wraps Newton/LU failures)."""

    def __init__(self, message, residual_norm=float("nan"), iterations=0, factorizations=0):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations
        self.factorizations = factorizations


class StabilityError(PostSDEError, ValueError):
    """Requested a stationary quantity at an unstable step size."""


class PoleError(PostSDEError, ZeroDivisionError):
    pass


class SynthesisError(PostSDEError, ValueError):
    pass


class NoRealSolution(PostSDEError, ValueError):
    pass


class EstimationError(PostSDEError):
    """Every trajectory of an ergodic estimate was rejected."""


class QuadratureError(PostSDEError):
    pass


class ConfigError(PostSDEError, ValueError):
    pass
