"""Exception hierarchy shared by the solvers, checkers and CLI."""

from __future__ import annotations


class CaginalpError(Exception):
    """Base class for all package errors."""


class NonFiniteFieldError(CaginalpError, ValueError):
    """A field or trajectory would contain NaN or Inf entries."""


class ConfigError(CaginalpError, ValueError):
    """Invalid configuration or solver parameters."""


class InconclusiveError(CaginalpError, ArithmeticError):
    """A sampling-based check could not reach a verdict (e.g. overflow in the box)."""


class SolverError(CaginalpError, RuntimeError):
    """A numerical solve failed."""


class LinearSolverError(SolverError):
    """Conjugate gradient did not reach its tolerance.

    Attributes:
        residual: relative residual at exit.
        iterations: iterations performed.
    """

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class BlowUpError(SolverError):
    """The explicit nonlinearity evaluation exceeded the blow-up guard."""

    def __init__(self, message: str, step: int, value: float):
        super().__init__(message)
        self.step = step
        self.value = value


class FixedPointError(SolverError):
    """Damped Picard iteration failed; ``ledger`` holds the history up to failure."""

    def __init__(self, message: str, ledger=None):
        super().__init__(message)
        self.ledger = ledger
