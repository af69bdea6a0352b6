"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class EmptyMeshError(ValueError):
    """Masking left no cell to triangulate."""


class DegenerateInputError(ValueError):
    """Input data cannot be normalized (e.g. an all-zero image)."""


class UnsupportedFormatError(ValueError):
    """The requested export does not exist for this kind of mesh."""


class SolverFailureError(RuntimeError):
    """A linear solve did not reach the requested residual."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class DivergenceError(RuntimeError):
    """A time integration produced non-finite values."""

    def __init__(self, message, step):
        super().__init__(f"{message} at step {step}")
        self.step = step
