"""Time sources: a wall-clock and a virtual clock with the same interface.

All simulated latencies, health timestamps and watchdog deadlines go through
a clock object so the whole stack can run either in real time (benchmarks)
or on a virtual clock (fast, deterministic tests).
"""

from __future__ import annotations

import threading
import time
from typing import Protocol

# Below this, sleeping is less accurate than spinning on the counter.
_SPIN_THRESHOLD_NS = 200_000


class Clock(Protocol):
    def now_ns(self) -> int: ...

    def delay_ns(self, ns: int) -> None: ...


class MonotonicClock:
    """Wall-clock time; delays are physically slept (hybrid sleep + spin)."""

    def now_ns(self) -> int:
        return time.perf_counter_ns()

    def delay_ns(self, ns: int) -> None:
        if ns <= 0:
            return
        deadline = time.perf_counter_ns() + ns
        if ns > _SPIN_THRESHOLD_NS:
            time.sleep((ns - _SPIN_THRESHOLD_NS) / 1e9)
        while time.perf_counter_ns() < deadline:
            pass


class VirtualClock:
    """Counter-based clock; delays advance the counter atomically.

    A single coordinator owns the instance; concurrent advancing is safe.
    """

    def __init__(self, start_ns: int = 0):
        self._now_ns = start_ns
        self._lock = threading.Lock()

    def now_ns(self) -> int:
        with self._lock:
            return self._now_ns

    def advance_ns(self, ns: int) -> None:
        if ns < 0:
            raise ValueError("cannot advance a clock backwards")
        with self._lock:
            self._now_ns += ns

    def delay_ns(self, ns: int) -> None:
        self.advance_ns(max(0, ns))
