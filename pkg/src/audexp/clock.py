"""Session timing substrate: one interface, virtual and wall-clock modes.

All engine timestamps are unsigned microseconds from an arbitrary origin.
The virtual clock advances instantly on wait_until, which is what makes
headless simulated sessions deterministic and fast; the real clock sleeps.
"""

from __future__ import annotations

import time
from typing import Protocol


class Clock(Protocol):
    def now_us(self) -> int: ...

    def wait_until(self, t_us: int) -> None: ...


class VirtualClock:
    """Discrete simulated time starting at zero."""

    def __init__(self, start_us: int = 0) -> None:
        self._now_us = start_us

    def now_us(self) -> int:
        return self._now_us

    def wait_until(self, t_us: int) -> None:
        if t_us > self._now_us:
            self._now_us = t_us


class RealClock:
    """Monotonic wall time, anchored at construction."""

    def __init__(self) -> None:
        self._anchor_ns = time.monotonic_ns()

    def now_us(self) -> int:
        return (time.monotonic_ns() - self._anchor_ns) // 1000

    def wait_until(self, t_us: int) -> None:
        delta = t_us - self.now_us()
        if delta > 0:
            time.sleep(delta / 1e6)
