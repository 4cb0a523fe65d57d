"""Synchronous client for the hub daemon.

Thin typed wrappers over the RPC surface: register and attribute access,
bulk streaming with payload verification, and admin/health queries.
Every call carries a deadline; the client-wide default applies whenever
a call does not pass its own. Use one client per thread.
"""

from __future__ import annotations

import logging
import random
import struct
import zlib
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import grpc

from . import _schema as schema
from .errors import (
    MalformedTargetError,
    StreamIntegrityError,
    from_rpc_error,
)

logger = logging.getLogger("hubclient")

_VARIANTS = {"byte": schema.VARIANT_BYTES, "word32": schema.VARIANT_WORD32}


def _validate_target(target: str) -> None:
    host, sep, port = target.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise MalformedTargetError(f"expected host:port, got {target!r}")
    if not 0 < int(port) < 65536:
        raise MalformedTargetError(f"port out of range in {target!r}")
    if ":" in host and not (host.startswith("[") and host.endswith("]")):
        raise MalformedTargetError(
            f"IPv6 host must be bracketed in {target!r}")


# --- request builders (the exact messages placed on the wire) -----------------

def build_register_request(endpoint: str, address: int, width: int,
                           count: int, values: Sequence[int] = ()):
    return schema.RegisterRequest(endpoint=endpoint, address=address,
                                  width=width, count=count,
                                  values=list(values))


def build_attr_request(endpoint: str, attribute: str, value: int = 0):
    return schema.AttrRequest(endpoint=endpoint, attribute=attribute,
                              value=value)


def build_stream_request(block_size: int, block_count: int, variant: str,
                         seed: int):
    return schema.StreamRequest(block_size=block_size,
                                block_count=block_count,
                                variant=_VARIANTS[variant], seed=seed)


def build_stream_blocks(payloads: Iterable[bytes],
                        variant: str) -> Iterator:
    """Wrap payloads as StreamBlocks with gapless sequence numbers."""
    wire = _VARIANTS[variant]
    for sequence, payload in enumerate(payloads):
        if wire == schema.VARIANT_WORD32:
            words = list(struct.unpack(f"<{len(payload) // 4}I", payload))
            yield schema.StreamBlock(sequence=sequence,
                                     words=schema.WordArray(values=words))
        else:
            yield schema.StreamBlock(sequence=sequence, bytes=payload)


def payload_stream(seed: int, block_size: int,
                   block_count: int) -> Iterator[bytes]:
    """Regenerate the daemon's StreamRead payload for a given seed."""
    gen = random.Random(seed)
    for _ in range(block_count):
        yield gen.randbytes(block_size)


# --- typed results -------------------------------------------------------------

@dataclass(frozen=True)
class PluginStatus:
    name: str
    health: str
    services: tuple[str, ...]
    reason: str


@dataclass(frozen=True)
class ComponentStatus:
    component: str
    state: str
    reason: str
    since_ns: int


@dataclass(frozen=True)
class StreamResult:
    blocks: int
    bytes: int
    crc32: int


class HubClient:
    """Lazily connecting client; RPC errors surface per call as typed
    exceptions from hubclient.errors."""

    def __init__(self, target: str, default_deadline_ms: int = 2000,
                 compression: bool = False):
        _validate_target(target)
        if default_deadline_ms <= 0:
            raise ValueError("default_deadline_ms must be positive")
        self.target = target
        self.default_deadline_ms = default_deadline_ms
        self.compression = compression
        self._channel = grpc.insecure_channel(
            target,
            compression=(grpc.Compression.Gzip if compression
                         else grpc.Compression.NoCompression))
        self._calls = {}
        for (service, method), (req, resp) in schema.METHODS.items():
            if method == "StreamRead":
                factory = self._channel.unary_stream
            elif method == "StreamWrite":
                factory = self._channel.stream_unary
            else:
                factory = self._channel.unary_unary
            self._calls[method] = factory(
                f"/{service}/{method}",
                request_serializer=req.SerializeToString,
                response_deserializer=resp.FromString)

    # -- plumbing --

    def _timeout(self, deadline_ms: int | None) -> float:
        ms = self.default_deadline_ms if deadline_ms is None else deadline_ms
        return ms / 1000.0

    def _invoke(self, method: str, request, deadline_ms: int | None):
        try:
            return self._calls[method](request,
                                       timeout=self._timeout(deadline_ms))
        except grpc.RpcError as exc:
            raise from_rpc_error(exc) from None

    def close(self) -> None:
        self._channel.close()

    def __enter__(self) -> "HubClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- registers --

    def read_registers(self, endpoint: str, address: int, width: int = 32,
                       count: int = 1,
                       deadline_ms: int | None = None) -> list[int]:
        request = build_register_request(endpoint, address, width, count)
        return list(self._invoke("ReadRegisters", request, deadline_ms).values)

    def write_registers(self, endpoint: str, address: int,
                        values: Sequence[int], width: int = 32,
                        deadline_ms: int | None = None) -> None:
        request = build_register_request(endpoint, address, width,
                                         len(values), values)
        self._invoke("WriteRegisters", request, deadline_ms)

    def write_read_registers(self, endpoint: str, address: int,
                             values: Sequence[int], width: int = 32,
                             deadline_ms: int | None = None) -> list[int]:
        request = build_register_request(endpoint, address, width,
                                         len(values), values)
        return list(self._invoke("WriteReadRegisters", request,
                                 deadline_ms).values)

    # -- attributes --

    def read_attr(self, endpoint: str, attribute: str,
                  deadline_ms: int | None = None) -> int:
        request = build_attr_request(endpoint, attribute)
        return self._invoke("ReadAttr", request, deadline_ms).value

    def write_attr(self, endpoint: str, attribute: str, value: int,
                   deadline_ms: int | None = None) -> None:
        request = build_attr_request(endpoint, attribute, value)
        self._invoke("WriteAttr", request, deadline_ms)

    def write_read_attr(self, endpoint: str, attribute: str, value: int,
                        deadline_ms: int | None = None) -> int:
        request = build_attr_request(endpoint, attribute, value)
        return self._invoke("WriteReadAttr", request, deadline_ms).value

    # -- streaming --

    def stream_read(self, block_size: int, block_count: int,
                    variant: str = "byte", seed: int = 0,
                    verify: bool = True,
                    deadline_ms: int | None = None) -> Iterator[bytes]:
        """Yield each block's payload bytes; with verify=True every block
        is checked against the regenerated seed stream."""
        request = build_stream_request(block_size, block_count, variant, seed)
        expected = (payload_stream(seed, block_size, block_count)
                    if verify else None)
        call = self._calls["StreamRead"](request,
                                         timeout=self._timeout(deadline_ms))
        try:
            for index, block in enumerate(call):
                if block.sequence != index:
                    raise StreamIntegrityError(
                        f"sequence gap: got {block.sequence}, want {index}")
                if block.WhichOneof("payload") == "words":
                    values = block.words.values
                    payload = struct.pack(f"<{len(values)}I", *values)
                else:
                    payload = block.bytes
                if expected is not None and payload != next(expected):
                    raise StreamIntegrityError(
                        f"block {index} payload mismatch")
                yield payload
        except grpc.RpcError as exc:
            raise from_rpc_error(exc) from None

    def stream_write(self, payloads: Iterable[bytes], variant: str = "byte",
                     deadline_ms: int | None = None) -> StreamResult:
        """Send payloads as a gapless block stream; returns the daemon's
        summary (block/byte counts and payload CRC-32)."""
        blocks = build_stream_blocks(payloads, variant)
        summary = self._invoke("StreamWrite", blocks, deadline_ms)
        return StreamResult(blocks=summary.blocks, bytes=summary.bytes,
                            crc32=summary.crc32)

    @staticmethod
    def crc32(payloads: Iterable[bytes]) -> int:
        """CRC-32 over concatenated payloads, as the daemon computes it."""
        crc = 0
        for payload in payloads:
            crc = zlib.crc32(payload, crc)
        return crc & 0xFFFFFFFF

    # -- admin and health --

    def list_plugins(self,
                     deadline_ms: int | None = None) -> list[PluginStatus]:
        response = self._invoke("ListPlugins", schema.ListPluginsRequest(),
                                deadline_ms)
        return [PluginStatus(name=p.name, health=p.health,
                             services=tuple(p.services), reason=p.reason)
                for p in response.plugins]

    def reload_plugin(self, name: str,
                      deadline_ms: int | None = None) -> int:
        request = schema.ReloadPluginRequest(name=name)
        return self._invoke("ReloadPlugin", request,
                            deadline_ms).endpoints_reloaded

    def get_health(self, component: str = "",
                   deadline_ms: int | None = None) -> list[ComponentStatus]:
        request = schema.GetHealthRequest(component=component)
        response = self._invoke("GetHealth", request, deadline_ms)
        return [ComponentStatus(component=s.component, state=s.state,
                                reason=s.reason, since_ns=s.since_ns)
                for s in response.states]


def connect(target: str, deadline_ms: int = 2000,
            compression: bool = False) -> HubClient:
    """Create a client; raises only on a malformed target, connection
    errors surface per call."""
    return HubClient(target, default_deadline_ms=deadline_ms,
                     compression=compression)
