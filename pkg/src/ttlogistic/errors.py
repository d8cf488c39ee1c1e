"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """Raised when an input violates a documented precondition."""


class NumericalError(RuntimeError):
    """Base class for numerical failures (CLI exit code 2)."""

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class StabilityError(NumericalError):
    """Explicit time step violates the CFL bound."""

    def __init__(self, message, max_dt=None):
        super().__init__(message)
        self.max_dt = max_dt

    def to_dict(self):
        out = super().to_dict()
        out["max_dt"] = self.max_dt
        return out


class DivergenceError(NumericalError):
    """Non-finite state produced during time stepping."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step

    def to_dict(self):
        out = super().to_dict()
        out["step"] = self.step
        return out


class DegenerateMatrixError(NumericalError):
    """Matrix handed to maxvol does not have full column rank."""


class StalledError(NumericalError):
    """Descent could not make progress (zero gradient or exhausted backtracking)."""


class EvaluationError(NumericalError):
    """Objective evaluation failed at a particular grid multi-index."""

    def __init__(self, message, multi_index=None):
        super().__init__(message)
        self.multi_index = multi_index

    def to_dict(self):
        out = super().to_dict()
        out["multi_index"] = None if self.multi_index is None else list(self.multi_index)
        return out
