from __future__ import annotations

import time

from audexp.clock import RealClock, VirtualClock


def test_virtual_clock_starts_at_zero_and_jumps():
    clock = VirtualClock()
    assert clock.now_us() == 0
    clock.wait_until(5_000_000)
    assert clock.now_us() == 5_000_000


def test_virtual_clock_never_goes_backwards():
    clock = VirtualClock(100)
    clock.wait_until(50)
    assert clock.now_us() == 100


def test_real_clock_is_monotone_and_sleeps():
    clock = RealClock()
    t0 = clock.now_us()
    clock.wait_until(t0 + 20_000)
    t1 = clock.now_us()
    assert t1 >= t0 + 20_000


def test_real_clock_wait_in_the_past_returns_immediately():
    clock = RealClock()
    start = time.monotonic()
    clock.wait_until(0)
    assert time.monotonic() - start < 0.05
