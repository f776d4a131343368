"""Run statistics and cooperative deadlines shared by the analyses."""

from __future__ import annotations

import time
from dataclasses import dataclass


class AnalysisTimeout(Exception):
    """An analysis exceeded its wall-clock budget."""


@dataclass(frozen=True)
class Stats:
    """Per-run counters; brute force leaves the game-specific fields at 0."""

    meta_states: int = 0
    winning_set: int = 0
    subsets_examined: int = 0
    meta_controllers: int = 0
    wall_ms: int = 0


class Deadline:
    """Wall-clock budget checked cooperatively inside enumeration loops."""

    def __init__(self, seconds: float):
        if seconds <= 0:
            raise ValueError("timeout must be positive")
        self.seconds = seconds
        self._expires = time.monotonic() + seconds

    def check(self) -> None:
        if time.monotonic() > self._expires:
            raise AnalysisTimeout(f"analysis exceeded {self.seconds:g}s")


def check_deadline(deadline: Deadline | None) -> None:
    if deadline is not None:
        deadline.check()
