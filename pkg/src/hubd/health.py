"""Component health registry with a constrained state machine.

States move Healthy <-> Degraded and anything -> Failed through
report(). Failed is sticky: only recovered(), called from the reload
path, brings a component back to Healthy. Transition timestamps are
strictly increasing per component even on a coarse or virtual clock.
"""

from __future__ import annotations

import enum
import logging
import threading
from dataclasses import dataclass

from .clock import Clock, MonotonicClock
from .errors import IllegalTransitionError, UnknownComponentError

logger = logging.getLogger(__name__)


class HealthState(str, enum.Enum):
    HEALTHY = "healthy"
    DEGRADED = "degraded"
    FAILED = "failed"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ComponentStatus:
    component: str
    state: HealthState
    reason: str
    since_ns: int


class HealthRegistry:
    """Tracks named components; thread safe."""

    def __init__(self, clock: Clock | None = None):
        self._clock = clock or MonotonicClock()
        self._lock = threading.Lock()
        self._entries: dict[str, ComponentStatus] = {}

    def _stamp(self, previous: int) -> int:
        return max(self._clock.now_ns(), previous + 1)

    def register(self, component: str,
                 state: HealthState = HealthState.HEALTHY,
                 reason: str = "") -> None:
        with self._lock:
            if component in self._entries:
                raise ValueError(f"component already registered: {component!r}")
            self._entries[component] = ComponentStatus(
                component, state, reason, self._stamp(-1))

    def unregister(self, component: str) -> None:
        with self._lock:
            if self._entries.pop(component, None) is None:
                raise UnknownComponentError(component)

    def components(self) -> list[str]:
        with self._lock:
            return list(self._entries)

    def get(self, component: str) -> ComponentStatus:
        with self._lock:
            entry = self._entries.get(component)
            if entry is None:
                raise UnknownComponentError(component)
            return entry

    def snapshot(self) -> list[ComponentStatus]:
        with self._lock:
            return list(self._entries.values())

    def report(self, component: str, state: HealthState, reason: str = "") -> None:
        """Observe a component's state; same-state reports are no-ops."""
        state = HealthState(state)
        with self._lock:
            entry = self._entries.get(component)
            if entry is None:
                raise UnknownComponentError(component)
            if entry.state is state:
                return
            if entry.state is HealthState.FAILED:
                raise IllegalTransitionError(component, entry.state.value,
                                             state.value)
            self._entries[component] = ComponentStatus(
                component, state, reason, self._stamp(entry.since_ns))
            logger.info("health: %s %s -> %s (%s)", component,
                        entry.state, state, reason or "no reason")

    def recovered(self, component: str, reason: str = "reloaded") -> None:
        """Reload path: the one legal exit from Failed, back to Healthy."""
        with self._lock:
            entry = self._entries.get(component)
            if entry is None:
                raise UnknownComponentError(component)
            if entry.state is HealthState.HEALTHY:
                return
            self._entries[component] = ComponentStatus(
                component, HealthState.HEALTHY, reason,
                self._stamp(entry.since_ns))
            logger.info("health: %s %s -> healthy (%s)", component,
                        entry.state, reason)
