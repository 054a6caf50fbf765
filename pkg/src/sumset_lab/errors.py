"""Exception types raised across sumset_lab."""

from __future__ import annotations


class SumsetLabError(Exception):
    """Base class for every error raised by this package."""


class CompositeModulus(SumsetLabError, ValueError):
    pass


class ZeroWindow(SumsetLabError, ValueError):
    pass


class OutOfRange(SumsetLabError, ValueError):
    pass


class ZeroStep(SumsetLabError, ValueError):
    pass


class ContextMismatch(SumsetLabError, ValueError):
    pass


class PairOutOfDomain(SumsetLabError, ValueError):
    pass


class BadAlpha(SumsetLabError, ValueError):
    pass


class CapExceeded(SumsetLabError, RuntimeError):
    pass


class BudgetExceedsSet(SumsetLabError, ValueError):
    pass


class PreconditionGap(SumsetLabError, ValueError):
    pass


class HypothesisViolated(SumsetLabError, ValueError):
    pass


class BudgetTooSmall(SumsetLabError, ValueError):
    pass


class WrongCase(SumsetLabError, ValueError):
    pass


class WrongTerminal(SumsetLabError, ValueError):
    pass


class InfeasibleSpec(SumsetLabError, ValueError):
    pass


class ConfigError(SumsetLabError, ValueError):
    pass


class SchemaVersionError(SumsetLabError, ValueError):
    pass


class StickoutNotFound(SumsetLabError, RuntimeError):
    """No stickout pair was sampled within the restart budget.

    This is a statistical anomaly, not a disproof: the existence argument
    is an expectation bound.
    """


class StageFailed(SumsetLabError, RuntimeError):
    """A stage of a multi-step construction missed its target.

    ``stage`` names the step (``"stickout[3]"``, ``"thm5"``, ...) and
    ``diagnostics`` carries whatever the stage measured before giving up.
    """

    def __init__(self, stage: str, diagnostics: dict | None = None, message: str | None = None):
        self.stage = stage
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message or f"stage {stage!r} failed: {self.diagnostics}")
