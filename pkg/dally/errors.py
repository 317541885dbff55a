from __future__ import annotations

from typing import Sequence


class DomainError(ValueError):
    """An argument lies outside the domain of a formula or operation."""


class UsageError(ValueError):
    """Bad combination of inputs at the API/CLI surface (empty grids, ...)."""


class SimulationLogicError(RuntimeError):
    """
    Internal invariant broken during a simulation run (a bug, not a channel outcome).
    `trace` holds the last events processed before the failure.
    """

    def __init__(self, message: str, trace: Sequence[str] = ()):
        super().__init__(message)
        self.trace = list(trace)

    def __str__(self) -> str:
        base = super().__str__()
        if not self.trace:
            return base
        tail = "\n  ".join(self.trace)
        return f"{base}\nlast events:\n  {tail}"


class SimulationAborted(SimulationLogicError):
    """An event handler raised; the original exception is chained as __cause__."""
