"""Software watchdog: components register a timeout and must kick
within it.

poll() checks every registration against the clock; a registration
whose last kick is older than timeout plus grace fires its expiry
action exactly once, then stays quiet until the next kick re-arms it.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Callable

from .clock import Clock, MonotonicClock, VirtualClock
from .errors import UnknownComponentError

logger = logging.getLogger(__name__)

REALTIME_GRACE_NS = 10_000_000
VIRTUAL_GRACE_NS = 1


def default_grace_ns(clock: Clock) -> int:
    """Slack added to timeouts: scheduler noise in realtime, one tick virtual."""
    return VIRTUAL_GRACE_NS if isinstance(clock, VirtualClock) else REALTIME_GRACE_NS


@dataclass
class _Entry:
    timeout_ns: int
    last_kick_ns: int
    fired: bool = False


class Watchdog:
    """Thread-safe registration table driven by an external poller."""

    def __init__(
        self,
        clock: Clock | None = None,
        grace_ns: int | None = None,
        on_expire: Callable[[str], None] | None = None,
    ):
        self._clock = clock or MonotonicClock()
        self.grace_ns = (default_grace_ns(self._clock)
                         if grace_ns is None else grace_ns)
        self._on_expire = on_expire
        self._lock = threading.Lock()
        self._entries: dict[str, _Entry] = {}
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def register(self, component: str, timeout_ms: int) -> None:
        if timeout_ms <= 0:
            raise ValueError(f"timeout must be positive: {timeout_ms}")
        with self._lock:
            if component in self._entries:
                raise ValueError(f"component already registered: {component!r}")
            self._entries[component] = _Entry(
                timeout_ns=timeout_ms * 1_000_000,
                last_kick_ns=self._clock.now_ns())

    def unregister(self, component: str) -> None:
        with self._lock:
            if self._entries.pop(component, None) is None:
                raise UnknownComponentError(component)

    def kick(self, component: str) -> None:
        """Record liveness; also re-arms a fired registration."""
        with self._lock:
            entry = self._entries.get(component)
            if entry is None:
                raise UnknownComponentError(component)
            entry.last_kick_ns = self._clock.now_ns()
            entry.fired = False

    def expired(self, component: str) -> bool:
        with self._lock:
            entry = self._entries.get(component)
            if entry is None:
                raise UnknownComponentError(component)
            return entry.fired

    def poll(self) -> list[str]:
        """Fire expiry actions for newly overdue components; returns them."""
        now = self._clock.now_ns()
        newly: list[str] = []
        with self._lock:
            for component, entry in self._entries.items():
                if entry.fired:
                    continue
                if now - entry.last_kick_ns > entry.timeout_ns + self.grace_ns:
                    entry.fired = True
                    newly.append(component)
        for component in newly:
            logger.error("watchdog expired for %s", component)
            if self._on_expire is not None:
                self._on_expire(component)
        return newly

    def start(self, interval_s: float = 0.05) -> None:
        """Run poll() on a daemon thread (realtime deployments)."""
        if self._thread is not None:
            return
        self._stop.clear()

        def loop() -> None:
            while not self._stop.wait(interval_s):
                self.poll()

        self._thread = threading.Thread(target=loop, name="watchdog", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._thread is None:
            return
        self._stop.set()
        self._thread.join()
        self._thread = None
