"""Exception types shared across the package.

ValidationError subclasses map to CLI exit code 1, the RuntimeError
subclasses to exit code 2.
"""


class ValidationError(ValueError):
    """Bad user input: configuration, window geometry, model selection."""


class NonNegativityViolation(ValidationError):
    """A diffusion model returned a negative value."""


class InsufficientDomain(ValidationError):
    """More sample points requested than valid lattice points exist."""


class PointSkipped(ValidationError):
    """Conditioning point too close to the boundary or final time."""


class SimulationDiverged(RuntimeError):
    """A lattice state entry became non-finite during time stepping."""

    def __init__(self, step_index, message=None):
        self.step_index = step_index
        super().__init__(message or f"non-finite field value at step {step_index}")


class WindowUnavailable(LookupError):
    """Requested rows are not resident in the field view."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge; carries the achieved error."""

    def __init__(self, message, error_estimate=None):
        self.error_estimate = error_estimate
        super().__init__(message)
