"""Exception hierarchy shared by the solver and the CLI."""

from __future__ import annotations


class ViscoflowError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class ConfigError(ViscoflowError):
    """Run configuration failed validation; carries every problem found."""

    exit_code = 2

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class NonPositiveDensityError(ViscoflowError):
    """Density is zero or negative somewhere on the grid."""

    exit_code = 3

    def __init__(self, message, cell=None):
        self.cell = cell
        super().__init__(message)


class CFLError(ViscoflowError):
    """Characteristic tracing refused a step that moves too far."""

    exit_code = 3

    def __init__(self, message, advisory_dt):
        self.advisory_dt = advisory_dt
        super().__init__(message)


class LameSolveError(ViscoflowError):
    """Conjugate gradients did not reach the requested tolerance."""

    exit_code = 3

    def __init__(self, message, best=None, history=None):
        self.best = best
        self.history = list(history or [])
        super().__init__(message)


class PicardDivergenceError(ViscoflowError):
    exit_code = 3

    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


class NormBlowupError(PicardDivergenceError):
    """A Picard iterate left the ball of admissible velocities."""


class TimeStepUnderflowError(ViscoflowError):
    exit_code = 3


class InvariantViolation(ViscoflowError):
    exit_code = 4


class SnapshotIOError(ViscoflowError):
    exit_code = 5

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(message)


class NonFiniteFieldError(ViscoflowError, ValueError):
    """A field contains NaN or Inf."""

    exit_code = 3
