"""The hub: plugin loading, service registration and daemon lifecycle.

Startup order: backend, device tree, endpoints, health registry,
watchdog, plugins (in config order, skip-and-continue on failure), then
one gRPC server carrying the admin service plus every plugin service.
Admin reload is the only post-startup mutation and is serialized.
"""

from __future__ import annotations

import importlib
import importlib.util
import logging
import os
import sys
import threading
from concurrent import futures
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import grpc

from .clock import Clock, MonotonicClock, VirtualClock
from .config import HubConfig
from .devicetree import DeviceNode, parse_device_tree, parse_device_tree_file
from .endpoints import Endpoint, make_endpoints
from .errors import (
    AbiMismatchError,
    BindError,
    ConstructFailedError,
    DuplicateServiceNameError,
    PluginNotFoundError,
    UnknownPluginError,
)
from .health import HealthRegistry, HealthState
from .plugins import api as plugin_api
from .rpc import schema
from .sim import SimBackend
from .watchdog import Watchdog

logger = logging.getLogger(__name__)

HUB_COMPONENT = "hub"
WATCHDOG_EXIT_CODE = 9


@dataclass
class PluginHandle:
    name: str
    module: object
    plugin: plugin_api.Plugin
    services: list[plugin_api.RpcService]
    logger: logging.Logger


@dataclass
class LoadFailure:
    name: str
    error: str


def locate_plugin(library: str, search_paths: Sequence[str | Path]) -> str:
    """Resolve a plugin locator: 'builtin:<key>' or a filename on the path."""
    if library.startswith("builtin:"):
        key = library.split(":", 1)[1]
        module = plugin_api.BUILTIN_PLUGINS.get(key)
        if module is None:
            raise PluginNotFoundError(
                key, [f"builtin registry ({', '.join(plugin_api.BUILTIN_PLUGINS)})"])
        return library
    searched = []
    for directory in search_paths:
        candidate = Path(directory) / library
        searched.append(str(candidate))
        if candidate.is_file():
            return str(candidate)
    raise PluginNotFoundError(library, searched)


def load_plugin_module(locator: str):
    """Import the module behind a resolved locator and check its contract."""
    if locator.startswith("builtin:"):
        module = importlib.import_module(
            plugin_api.BUILTIN_PLUGINS[locator.split(":", 1)[1]])
    else:
        name = f"hubd_plugin_{Path(locator).stem}_{abs(hash(locator)) & 0xFFFF:x}"
        spec = importlib.util.spec_from_file_location(name, locator)
        if spec is None or spec.loader is None:
            raise PluginNotFoundError(locator, [locator])
        module = importlib.util.module_from_spec(spec)
        sys.modules[name] = module
        spec.loader.exec_module(module)
    version = getattr(module, "PLUGIN_API_VERSION", None)
    if version != plugin_api.PLUGIN_API_VERSION:
        raise AbiMismatchError(
            f"{locator}: plugin API version {version!r}, hub speaks "
            f"{plugin_api.PLUGIN_API_VERSION}")
    for symbol in ("construct", "destruct"):
        if not callable(getattr(module, symbol, None)):
            raise AbiMismatchError(f"{locator}: missing factory symbol {symbol!r}")
    return module


def _default_expiry_action(component: str) -> None:
    logging.critical("watchdog expired for %r; exiting for restart", component)
    # deployment realization of a hardware reboot
    os._exit(WATCHDOG_EXIT_CODE)


class Hub:
    """One daemon instance. build() then start(); stop() tears down."""

    def __init__(
        self,
        config: HubConfig,
        search_paths: Sequence[str | Path] = (),
        clock: Clock | None = None,
        expiry_action: Callable[[str], None] | None = None,
        max_workers: int = 32,
    ):
        self.config = config
        self.search_paths = [Path(p) for p in search_paths]
        self.clock = clock or (
            VirtualClock() if config.backend.get("mode") == "virtual"
            else MonotonicClock())
        self._expiry_action = expiry_action or _default_expiry_action
        self._max_workers = max_workers

        self.backend: SimBackend | None = None
        self.nodes: list[DeviceNode] = []
        self.endpoints: dict[str, Endpoint] = {}
        self.health = HealthRegistry(self.clock)
        self.watchdog: Watchdog | None = None
        self.handles: list[PluginHandle] = []
        self.load_failures: list[LoadFailure] = []
        self.server: grpc.Server | None = None
        self.bound_port: int | None = None

        self._reload_lock = threading.Lock()
        self._stop_event = threading.Event()
        self._kicker: threading.Thread | None = None

    # construction

    def build(self) -> None:
        """Assemble backend, endpoints and plugins; no sockets yet."""
        self.health.register(HUB_COMPONENT)
        self.backend = SimBackend.from_config(self.config.backend, self.clock)
        source = self.config.device_tree_source
        if source == "sim":
            self.nodes = parse_device_tree(self.backend.device_tree_text(),
                                           origin="sim")
        else:
            self.nodes = parse_device_tree_file(source)
        self.endpoints = make_endpoints(
            self.nodes, self.backend,
            on_fault=self._endpoint_failed,
            on_recover=self._endpoint_recovered)
        for label in self.endpoints:
            self.health.register(label)

        if self.config.watchdog.enabled:
            self.watchdog = Watchdog(self.clock, on_expire=self._expiry_action)
            self.watchdog.register(HUB_COMPONENT,
                                   self.config.watchdog.timeout_ms)

        for request in self.config.plugins:
            self._load_one(request)

        if self.load_failures:
            failed = ", ".join(f.name for f in self.load_failures)
            self.health.report(HUB_COMPONENT, HealthState.DEGRADED,
                               f"plugins failed to load: {failed}")

    def _load_one(self, request) -> None:
        plugin_logger = logging.getLogger(f"hubd.plugin.{request.name}")
        try:
            locator = locate_plugin(request.library, self.search_paths)
            module = load_plugin_module(locator)
            ctx = plugin_api.HubContext(
                name=request.name,
                endpoints=self.endpoints,
                health=self.health,
                watchdog=self.watchdog,
                backend=self.backend,
                clock=self.clock,
                reload_endpoint=self.reload_endpoint,
                get_plugin=self.get_plugin,
            )
            try:
                plugin = module.construct(request.config, plugin_logger, ctx)
            except Exception as exc:
                raise ConstructFailedError(
                    f"plugin {request.name!r}: constructor failed: {exc}") from exc
            services = list(plugin.services())
        except Exception as exc:
            logger.error("skipping plugin %r: %s", request.name, exc)
            self.load_failures.append(LoadFailure(request.name, str(exc)))
            return
        self.health.register(request.name)
        self.handles.append(PluginHandle(
            name=request.name, module=module, plugin=plugin,
            services=services, logger=plugin_logger))
        logger.info("loaded plugin %r providing %s", request.name,
                    [s.name for s in services] or "no services")

    def service_names(self) -> list[str]:
        """Ordered service registry: admin first, then plugins as configured."""
        names = [schema.ADMIN_SERVICE]
        for handle in self.handles:
            names += [service.name for service in handle.services]
        return names

    # serving

    def start(self) -> None:
        """Register every service and bind the listen address."""
        seen: dict[str, str] = {schema.ADMIN_SERVICE: HUB_COMPONENT}
        handlers = [schema.service_handler(schema.ADMIN_SERVICE,
                                           _AdminServicer(self))]
        for handle in self.handles:
            for service in handle.services:
                if service.name in seen:
                    raise DuplicateServiceNameError(service.name, handle.name)
                seen[service.name] = handle.name
                handlers.append(service.handler)

        compression = (grpc.Compression.Gzip if self.config.compression_enabled
                       else grpc.Compression.NoCompression)
        self.server = grpc.server(
            futures.ThreadPoolExecutor(
                max_workers=self._max_workers,
                thread_name_prefix="hubd-rpc"),
            compression=compression)
        self.server.add_generic_rpc_handlers(tuple(handlers))
        try:
            port = self.server.add_insecure_port(self.config.server_listen)
        except RuntimeError as exc:
            # grpc raises instead of returning 0 on newer releases
            raise BindError(self.config.server_listen) from exc
        if port == 0:
            raise BindError(self.config.server_listen)
        self.bound_port = port
        self.server.start()

        for handle in self.handles:
            handle.plugin.start()
        if self.watchdog is not None:
            self.watchdog.start()
            self._start_kicker()
        logger.info("serving %d services on %s", len(handlers),
                    self.config.server_listen)

    def _start_kicker(self) -> None:
        period = self.config.watchdog.timeout_ms / 3000.0

        def loop() -> None:
            while not self._stop_event.wait(period):
                self.watchdog.kick(HUB_COMPONENT)

        self._kicker = threading.Thread(target=loop, name="hub-kicker",
                                        daemon=True)
        self._kicker.start()

    def wait(self) -> None:
        self._stop_event.wait()

    def stop(self, grace: float = 1.0) -> None:
        self._stop_event.set()
        if self.watchdog is not None:
            self.watchdog.stop()
        if self._kicker is not None:
            self._kicker.join(timeout=2.0)
            self._kicker = None
        if self.server is not None:
            self.server.stop(grace).wait()
            self.server = None
        for handle in self.handles:
            try:
                handle.module.destruct(handle.plugin)
            except Exception as exc:
                logger.error("destructor of %r failed: %s", handle.name, exc)
        if self.backend is not None:
            self.backend.close()

    # shared services for plugins and admin

    def get_plugin(self, name: str):
        for handle in self.handles:
            if handle.name == name:
                return handle.plugin
        return None

    def get_handle(self, name: str) -> PluginHandle | None:
        for handle in self.handles:
            if handle.name == name:
                return handle
        return None

    def reload_endpoint(self, label: str) -> None:
        ep = self.endpoints.get(label)
        if ep is None:
            logger.warning("reload requested for unknown endpoint %r", label)
            return
        ep.reload()

    def reload_plugin(self, name: str) -> int:
        """Reload a plugin's endpoints; serialized, never restarts the server."""
        with self._reload_lock:
            handle = self.get_handle(name)
            if handle is None:
                raise UnknownPluginError(f"no such plugin: {name!r}")
            count = handle.plugin.reload()
            self.health.recovered(name, "reloaded")
            return count

    def _endpoint_failed(self, label: str, reason: str) -> None:
        try:
            self.health.report(label, HealthState.FAILED, reason)
        except Exception:
            pass  # repeated faults while already failed

    def _endpoint_recovered(self, label: str) -> None:
        self.health.recovered(label)


class _AdminServicer:
    def __init__(self, hub: Hub):
        self._hub = hub

    @plugin_api.rpc_method
    def ListPlugins(self, request, context):
        infos = []
        for handle in self._hub.handles:
            status = self._hub.health.get(handle.name)
            infos.append(schema.PluginInfo(
                name=handle.name,
                health=status.state.value,
                services=[s.name for s in handle.services],
                reason=status.reason))
        return schema.ListPluginsResponse(plugins=infos)

    @plugin_api.rpc_method
    def ReloadPlugin(self, request, context):
        count = self._hub.reload_plugin(request.name)
        return schema.ReloadPluginResponse(endpoints_reloaded=count)
