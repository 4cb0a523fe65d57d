"""Shared test helpers: a daemon runner and raw gRPC stubs."""

from __future__ import annotations

import contextlib
from typing import Iterator

import grpc
import pytest

from hubd.config import validate_config
from hubd.hub import Hub
from hubd.rpc import schema

ALL_PLUGINS = [
    {"name": "register", "library": "builtin:register"},
    {"name": "attr", "library": "builtin:attr"},
    {"name": "stream", "library": "builtin:stream"},
    {"name": "monitor", "library": "builtin:monitor"},
]


def _serialize(message) -> bytes:
    return message.SerializeToString()


class Stubs:
    """Raw per-method callables over one channel, no SDK involved."""

    def __init__(self, target: str, ready_timeout: float = 5.0):
        self.channel = grpc.insecure_channel(target)
        grpc.channel_ready_future(self.channel).result(timeout=ready_timeout)

        def unary(service, method, response):
            return self.channel.unary_unary(
                f"/{service}/{method}", request_serializer=_serialize,
                response_deserializer=response.FromString)

        S = schema
        self.read_registers = unary(S.REGISTER_SERVICE, "ReadRegisters",
                                    S.RegisterResponse)
        self.write_registers = unary(S.REGISTER_SERVICE, "WriteRegisters",
                                     S.RegisterResponse)
        self.write_read_registers = unary(S.REGISTER_SERVICE,
                                          "WriteReadRegisters",
                                          S.RegisterResponse)
        self.read_attr = unary(S.ATTR_SERVICE, "ReadAttr", S.AttrResponse)
        self.write_attr = unary(S.ATTR_SERVICE, "WriteAttr", S.AttrResponse)
        self.write_read_attr = unary(S.ATTR_SERVICE, "WriteReadAttr",
                                     S.AttrResponse)
        self.list_plugins = unary(S.ADMIN_SERVICE, "ListPlugins",
                                  S.ListPluginsResponse)
        self.reload_plugin = unary(S.ADMIN_SERVICE, "ReloadPlugin",
                                   S.ReloadPluginResponse)
        self.get_health = unary(S.HEALTH_SERVICE, "GetHealth",
                                S.GetHealthResponse)
        self.stream_read = self.channel.unary_stream(
            f"/{S.STREAM_SERVICE}/StreamRead",
            request_serializer=_serialize,
            response_deserializer=S.StreamBlock.FromString)
        self.stream_write = self.channel.stream_unary(
            f"/{S.STREAM_SERVICE}/StreamWrite",
            request_serializer=_serialize,
            response_deserializer=S.StreamSummary.FromString)

    def close(self) -> None:
        self.channel.close()


@contextlib.contextmanager
def run_hub(config_dict: dict | None = None,
            search_paths=(), **hub_kwargs) -> Iterator[tuple[Hub, str]]:
    """Build, start and tear down a daemon on an ephemeral port."""
    raw = dict(config_dict or {})
    raw.setdefault("server", {"listen": "127.0.0.1:0"})
    raw.setdefault("plugins", ALL_PLUGINS)
    config = validate_config(raw)
    hub = Hub(config, search_paths=search_paths, **hub_kwargs)
    hub.build()
    hub.start()
    try:
        yield hub, f"127.0.0.1:{hub.bound_port}"
    finally:
        hub.stop()


@pytest.fixture
def live() -> Iterator[tuple[Hub, Stubs]]:
    """A running daemon with all built-in plugins plus connected stubs."""
    with run_hub() as (hub, target):
        stubs = Stubs(target)
        try:
            yield hub, stubs
        finally:
            stubs.close()


@pytest.fixture
def hub_runner():
    """The run_hub context manager, reachable under importlib import mode."""
    return run_hub


@pytest.fixture
def make_stubs():
    """The Stubs class, reachable under importlib import mode."""
    return Stubs
