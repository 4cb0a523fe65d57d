"""The contract between the hub and its plugins.

A plugin is a Python module exporting three symbols:

    PLUGIN_API_VERSION = 2
    def construct(config: dict, logger, ctx: HubContext) -> Plugin: ...
    def destruct(plugin: Plugin) -> None: ...

The hub rejects modules whose PLUGIN_API_VERSION does not match its own
and isolates constructor failures. Plugins contribute gRPC services via
services(); service names must be unique across the whole daemon.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import grpc

from ..clock import Clock
from ..errors import (
    BackendFaultError,
    BackendUnavailableError,
    DecodeError,
    HubError,
    IllegalTransitionError,
    MisalignedError,
    NoSuchAttributeError,
    OutOfRangeError,
    UnknownComponentError,
    UnknownPluginError,
    UnknownTargetError,
    ValueTooWideError,
)
from ..health import HealthRegistry
from ..sim import SimBackend
from ..watchdog import Watchdog

if TYPE_CHECKING:
    from ..endpoints import Endpoint

PLUGIN_API_VERSION = 2

# locator key -> module path, for "builtin:<key>" plugin libraries
BUILTIN_PLUGINS = {
    "register": "hubd.plugins.registers",
    "attr": "hubd.plugins.attrs",
    "stream": "hubd.plugins.streams",
    "monitor": "hubd.plugins.monitor",
}


@dataclass
class HubContext:
    """Everything the hub hands a plugin at construction time."""

    name: str
    endpoints: dict[str, "Endpoint"]
    health: HealthRegistry
    watchdog: Watchdog | None
    backend: SimBackend
    clock: Clock
    reload_endpoint: Callable[[str], None] = field(default=lambda label: None)
    get_plugin: Callable[[str], object | None] = field(default=lambda name: None)


@dataclass(frozen=True)
class RpcService:
    name: str
    handler: grpc.GenericRpcHandler


class Plugin:
    """Base plugin: owns a name, config, logger and the hub context."""

    def __init__(self, config: dict, logger: logging.Logger, ctx: HubContext):
        self.config = dict(config or {})
        self.logger = logger
        self.ctx = ctx
        self.name = ctx.name

    def services(self) -> list[RpcService]:
        return []

    def start(self) -> None:
        """Called once after all services are registered."""

    def stop(self) -> None:
        """Called at daemon shutdown or plugin teardown."""

    def reload(self) -> int:
        """Reload the endpoints this plugin serves; returns how many."""
        return 0


_INVALID_ARGUMENT = (
    OutOfRangeError,
    MisalignedError,
    ValueTooWideError,
    NoSuchAttributeError,
    DecodeError,
    UnknownTargetError,
    ValueError,
)


def status_for(exc: BaseException) -> grpc.StatusCode:
    """Map internal errors onto wire status codes."""
    if isinstance(exc, _INVALID_ARGUMENT):
        return grpc.StatusCode.INVALID_ARGUMENT
    if isinstance(exc, (BackendFaultError, BackendUnavailableError)):
        return grpc.StatusCode.UNAVAILABLE
    if isinstance(exc, (UnknownComponentError, UnknownPluginError)):
        return grpc.StatusCode.NOT_FOUND
    if isinstance(exc, IllegalTransitionError):
        return grpc.StatusCode.FAILED_PRECONDITION
    return grpc.StatusCode.INTERNAL


def rpc_method(fn):
    """Translate internal exceptions into context.abort with a mapped code."""

    def wrapper(self, request, context):
        try:
            return fn(self, request, context)
        except (HubError, ValueError) as exc:
            context.abort(status_for(exc), str(exc))

    wrapper.__name__ = fn.__name__
    return wrapper


def rpc_stream_method(fn):
    """Same as rpc_method for generator (server-streaming) handlers."""

    def wrapper(self, request, context):
        try:
            yield from fn(self, request, context)
        except (HubError, ValueError) as exc:
            context.abort(status_for(exc), str(exc))

    wrapper.__name__ = fn.__name__
    return wrapper
