"""Monitoring plugin: serves HealthService and watches the platform.

Each monitor cycle samples temperature and voltages, recomputes the
boot-image CRC-32 against the stored checksum, and downgrades the
plugin's health to Degraded when anything violates its thresholds.
A local socket accepts line-delimited events from an external monitor
process; a configurable rule table maps events to log, degrade or
endpoint-reload actions.

Config subtree keys:
    interval_ms          cycle period; 0 disables the cycle thread
    temp_limit_mC        degrade above this temperature (default 70000)
    voltage_limits       {rail: [lo_mV, hi_mV]}
    notify_socket        path of the AF_UNIX event listener
    rules                [{"match": substr, "action": log|degrade|reload,
                           "component": optional target}]
    watchdog_timeout_ms  watchdog registration (default 3x interval)
"""

from __future__ import annotations

import os
import socket
import threading
import zlib
from dataclasses import dataclass, field

from ..health import HealthState
from ..rpc import schema
from .api import PLUGIN_API_VERSION, HubContext, Plugin, RpcService, rpc_method

__all__ = ["PLUGIN_API_VERSION", "construct", "destruct", "MonitorReport"]

DEFAULT_TEMP_LIMIT_MC = 70_000


@dataclass
class MonitorReport:
    temperature_mC: int | None
    voltages_mV: dict[str, int]
    checksum_ok: bool
    violations: list[str] = field(default_factory=list)

    @property
    def healthy(self) -> bool:
        return not self.violations


class _HealthServicer:
    def __init__(self, plugin: "MonitorPlugin"):
        self._plugin = plugin

    @rpc_method
    def GetHealth(self, request, context):
        health = self._plugin.ctx.health
        if request.component:
            statuses = [health.get(request.component)]
        else:
            statuses = health.snapshot()
        return schema.GetHealthResponse(states=[
            schema.ComponentHealth(
                component=s.component,
                state=s.state.value,
                reason=s.reason,
                since_ns=s.since_ns,
            ) for s in statuses])


class MonitorPlugin(Plugin):
    def __init__(self, config, logger, ctx: HubContext):
        super().__init__(config, logger, ctx)
        self.interval_ms = int(self.config.get("interval_ms", 0))
        self.temp_limit_mC = int(self.config.get("temp_limit_mC",
                                                 DEFAULT_TEMP_LIMIT_MC))
        self.voltage_limits = {
            rail: (int(lo), int(hi))
            for rail, (lo, hi) in (self.config.get("voltage_limits") or {}).items()
        }
        self.rules = list(self.config.get("rules") or [])
        self.notify_socket = self.config.get("notify_socket")
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._listener: socket.socket | None = None
        self._watchdog_registered = False

    def services(self) -> list[RpcService]:
        return [RpcService(
            schema.HEALTH_SERVICE,
            schema.service_handler(schema.HEALTH_SERVICE,
                                   _HealthServicer(self)))]

    # periodic monitoring

    def monitor_cycle(self) -> MonitorReport:
        """Sample sensors, verify the boot checksum, update plugin health."""
        sensors = self.ctx.backend.sensors
        violations: list[str] = []
        temperature: int | None = None
        voltages: dict[str, int] = {}
        try:
            temperature = sensors.read_temperature_mC()
            voltages = sensors.read_voltages_mV()
        except Exception as exc:
            self.logger.warning("sensor read failed: %s", exc)
            violations.append("sensor")
        if temperature is not None and temperature > self.temp_limit_mC:
            violations.append("temperature")
        for rail, (lo, hi) in self.voltage_limits.items():
            mv = voltages.get(rail)
            if mv is None or not lo <= mv <= hi:
                violations.append(f"voltage:{rail}")
        checksum_ok = (zlib.crc32(sensors.boot_image()) & 0xFFFFFFFF
                       == sensors.stored_crc32)
        if not checksum_ok:
            violations.append("checksum")

        report = MonitorReport(temperature, voltages, checksum_ok, violations)
        current = self.ctx.health.get(self.name).state
        if current is not HealthState.FAILED:
            if violations:
                self.ctx.health.report(self.name, HealthState.DEGRADED,
                                       ",".join(violations))
            else:
                self.ctx.health.report(self.name, HealthState.HEALTHY)
        if self._watchdog_registered:
            self.ctx.watchdog.kick(self.name)
        return report

    # external monitor events

    def handle_event(self, line: str) -> str:
        """Apply the rule table to one event line; returns the action taken."""
        line = line.strip()
        if not line:
            return "ignored"
        source, sep, message = line.partition(":")
        if not sep or not source:
            self.logger.warning("unparsable monitor event: %r", line)
            return "unparsable"
        for rule in self.rules:
            if rule.get("match", "") not in line:
                continue
            action = rule.get("action", "log")
            target = rule.get("component") or source
            if action == "log":
                self.logger.info("monitor event from %s: %s", source, message)
            elif action == "degrade":
                try:
                    self.ctx.health.report(target, HealthState.DEGRADED, message)
                except Exception as exc:
                    self.logger.warning("cannot degrade %r: %s", target, exc)
            elif action == "reload":
                self.logger.info("monitor event triggers reload of %s", target)
                self.ctx.reload_endpoint(target)
            else:
                self.logger.warning("rule has unknown action %r", action)
                return "unparsable"
            return action
        self.logger.info("unmatched monitor event: %s", line)
        return "log"

    # lifecycle

    def start(self) -> None:
        if self.interval_ms > 0:
            if self.ctx.watchdog is not None:
                timeout = int(self.config.get("watchdog_timeout_ms",
                                              3 * self.interval_ms))
                self.ctx.watchdog.register(self.name, timeout)
                self._watchdog_registered = True
            thread = threading.Thread(target=self._cycle_loop,
                                      name=f"{self.name}-cycle", daemon=True)
            self._threads.append(thread)
            thread.start()
        if self.notify_socket:
            self._listener = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            try:
                os.unlink(self.notify_socket)
            except FileNotFoundError:
                pass
            self._listener.bind(self.notify_socket)
            self._listener.listen()
            self._listener.settimeout(0.2)
            thread = threading.Thread(target=self._listen_loop,
                                      name=f"{self.name}-notify", daemon=True)
            self._threads.append(thread)
            thread.start()

    def _cycle_loop(self) -> None:
        while not self._stop.wait(self.interval_ms / 1000.0):
            try:
                self.monitor_cycle()
            except Exception as exc:
                self.logger.error("monitor cycle failed: %s", exc)

    def _listen_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with conn:
                conn.settimeout(1.0)
                buffer = b""
                try:
                    while True:
                        chunk = conn.recv(4096)
                        if not chunk:
                            break
                        buffer += chunk
                        while b"\n" in buffer:
                            line, buffer = buffer.split(b"\n", 1)
                            self.handle_event(line.decode(errors="replace"))
                except socket.timeout:
                    pass
                if buffer:
                    self.handle_event(buffer.decode(errors="replace"))

    def stop(self) -> None:
        self._stop.set()
        if self._listener is not None:
            self._listener.close()
        for thread in self._threads:
            thread.join(timeout=2.0)
        self._threads.clear()
        if self.notify_socket:
            try:
                os.unlink(self.notify_socket)
            except OSError:
                pass
        if self._watchdog_registered:
            try:
                self.ctx.watchdog.unregister(self.name)
            except Exception:
                pass
            self._watchdog_registered = False


def construct(config, logger, ctx: HubContext) -> MonitorPlugin:
    return MonitorPlugin(config, logger, ctx)


def destruct(plugin: MonitorPlugin) -> None:
    plugin.stop()
