"""Exception hierarchy shared by the numerical core and the harness."""


class LabError(Exception):
    """Base class for all laboratory errors."""
    exit_code = 3

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.message = message
        self.diagnostics = dict(diagnostics or {})

    def to_dict(self):
        return {
            'error': type(self).__name__,
            'message': self.message,
            'diagnostics': self.diagnostics
        }


class DomainError(LabError, ValueError):
    """A precondition on the inputs of an operation is violated."""


class ConfigError(LabError):
    """The experiment configuration cannot be resolved."""
    exit_code = 2


class NumericalError(LabError, ArithmeticError):
    """A numerical procedure failed (non-convergence, blow-up, solver failure)."""


class BoundaryError(NumericalError):
    """Probability mass leaked past the grid edges."""


class StabilityError(NumericalError):
    """Time integration became unstable or would be unstable."""


class CFLViolation(StabilityError):
    """The requested time step violates the CFL limit."""

    def __init__(self, message, suggested_dt, diagnostics=None):
        diagnostics = dict(diagnostics or {})
        diagnostics['suggested_dt'] = suggested_dt
        super().__init__(message, diagnostics)
        self.suggested_dt = suggested_dt
