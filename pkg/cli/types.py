from __future__ import annotations

from typing import Protocol

from core.qap import Assignment, QapInstance


class SolverProtocol(Protocol):
    """Anything that turns an instance into an assignment and its cost."""

    def __call__(self, instance: QapInstance) -> tuple[Assignment, float]: ...


class ClockProtocol(Protocol):
    """Monotonic seconds, injectable so tests can pin wall times."""

    def __call__(self) -> float: ...


class OutputProtocol(Protocol):
    """Minimal text sink for command output."""

    def write(self, text: str, /) -> int: ...
