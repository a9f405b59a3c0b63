"""Real and virtual clocks (milliseconds, monotone non-decreasing)."""

from __future__ import annotations

import time

from medrt.errors import ValidationError


class RealClock:
    mode = "real"

    def __init__(self):
        self._origin = time.monotonic()

    def now(self) -> float:
        return (time.monotonic() - self._origin) * 1000.0


class VirtualClock:
    mode = "virtual"

    def __init__(self, start_ms: float = 0.0):
        self._now = float(start_ms)

    def now(self) -> float:
        return self._now

    def advance(self, dt_ms: float) -> float:
        if dt_ms < 0:
            raise ValidationError("clock cannot move backwards")
        self._now += dt_ms
        return self._now

    def advance_to(self, t_ms: float) -> float:
        if t_ms < self._now:
            raise ValidationError("clock cannot move backwards")
        self._now = t_ms
        return self._now
