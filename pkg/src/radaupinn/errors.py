"""Exception hierarchy shared by the solver, network and CLI layers."""


class RadauPinnError(Exception):
    """Base class for all package errors."""


class DomainError(RadauPinnError, ValueError):
    """An argument lies outside the supported domain."""


class NumericalError(RadauPinnError, ArithmeticError):
    """A numerical procedure failed (singular matrix, non-finite value, ...)."""


class StepFailure(NumericalError):
    """A Radau step did not converge.

    Carries the last residual and, for singular iteration matrices, a flag so
    callers can tell a too-large step (or an index problem) from slow Newton.
    """

    def __init__(self, message, residual=float("nan"), singular=False, t=None):
        super().__init__(message)
        self.residual = residual
        self.singular = singular
        self.t = t


class TrainingAborted(RadauPinnError):
    """Training produced a non-finite loss; best-so-far state is attached."""

    def __init__(self, message, model=None, history=None):
        super().__init__(message)
        self.model = model
        self.history = history


class ConfigError(RadauPinnError, ValueError):
    """Invalid run configuration (unknown key, bad type, out of range)."""
