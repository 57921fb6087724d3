"""
Domain exceptions. Validators report schedule defects instead of raising;
everything here signals a caller error or an algorithm giving up.
"""
from __future__ import annotations

from typing import Any


class FlowschedError(Exception):
    """Base class for every error raised by the package."""
    pass


class InstanceValidationError(FlowschedError, ValueError):
    """An instance (or a value derived from one) breaks a model invariant."""
    pass


class InvalidCompletionError(FlowschedError, ValueError):
    """A completion vector places some job before its release."""
    pass


class InfeasibleDeadlinesError(FlowschedError):
    """EDF cannot meet the deadlines; carries the violated (machine, interval)."""

    def __init__(self, witness: Any, message: str | None = None) -> None:
        self.witness = witness
        super().__init__(message or f"deadlines infeasible, witness={witness}")


class IterationLimitExceeded(FlowschedError):
    pass


class UncoverablePointError(FlowschedError):
    def __init__(self, point: Any, message: str | None = None) -> None:
        self.point = point
        super().__init__(message or f"point {point} cannot reach its demand")


class CoverDimensionError(FlowschedError, ValueError):
    pass


class LimitExceededError(FlowschedError):
    """Exhaustive search refused: the input is beyond the configured limit."""
    pass


class ResidualUncoveredError(FlowschedError):
    pass


class RoundingAssertionError(FlowschedError):
    pass


class CycleDetectedError(InstanceValidationError):
    pass


class NoFeasibleSpeedError(FlowschedError):
    pass


class LpSolveError(FlowschedError):
    """A pipeline LP that must be feasible and bounded came back otherwise."""

    def __init__(self, status: str, message: str | None = None) -> None:
        self.status = status
        super().__init__(message or f"LP solve ended with status {status}")
