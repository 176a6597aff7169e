"""Exception hierarchy shared by every module.

Configuration problems derive from :class:`ModelError` (CLI exit code 1);
numerical failures derive from :class:`NumericalFailure` (exit code 2) and
carry the name of the module that raised them.
"""

from __future__ import annotations


class ModelError(ValueError):
    """Invalid model parameters or configuration."""


class NumericalFailure(ArithmeticError):
    """Base for numerical failures; ``module`` names the origin."""

    module = "largedam"

    def __init__(self, message: str, module: str | None = None):
        super().__init__(message)
        if module is not None:
            self.module = module


class DomainError(NumericalFailure):
    """A transform was evaluated outside its convergence strip."""

    module = "stochastic-model"


class TruncationError(NumericalFailure):
    """A series could not be truncated to the requested tolerance."""

    module = "busy-period"


class NumericalError(NumericalFailure):
    """A recurrence produced a non-finite value."""

    module = "busy-period"


class NoRoot(NumericalFailure):
    """A root bracket contains no sign change."""

    module = "asymptotics"


class RegimeError(NumericalFailure):
    """The requested asymptotic regime does not match the model."""

    module = "asymptotics"


class DegenerateModel(NumericalFailure):
    """Internal consistency failure in the stationary formulas."""

    module = "stationary"


class SearchError(NumericalFailure):
    """The optimizer bracket does not contain a minimum."""

    module = "objective-control"
