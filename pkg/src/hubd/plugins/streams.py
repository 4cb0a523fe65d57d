"""Bulk streaming plugin: serves StreamService.

StreamRead emits deterministic pseudo-random payload derived from the
request seed so clients can independently regenerate and verify it;
StreamWrite consumes blocks and answers with counts and a CRC-32 the
sender can check against its own.
"""

from __future__ import annotations

import random
import struct
import zlib

from ..rpc import schema
from .api import (
    PLUGIN_API_VERSION,
    HubContext,
    Plugin,
    RpcService,
    rpc_method,
    rpc_stream_method,
)

__all__ = ["PLUGIN_API_VERSION", "construct", "destruct", "payload_stream"]

MAX_BLOCK_SIZE = 4 * 1024 * 1024
MAX_BLOCK_COUNT = 1 << 20


def payload_stream(seed: int, block_size: int, block_count: int):
    """Yield the per-block payload bytes for a seed (the wire contract)."""
    gen = random.Random(seed)
    for _ in range(block_count):
        yield gen.randbytes(block_size)


def words_to_bytes(values) -> bytes:
    return struct.pack(f"<{len(values)}I", *values)


def bytes_to_words(payload: bytes) -> list[int]:
    return list(struct.unpack(f"<{len(payload) // 4}I", payload))


class _StreamServicer:
    def __init__(self, plugin: "StreamPlugin"):
        self._plugin = plugin

    @rpc_stream_method
    def StreamRead(self, request, context):
        block_size = request.block_size
        block_count = request.block_count
        if not 1 <= block_size <= MAX_BLOCK_SIZE:
            raise ValueError(
                f"block_size must be in [1, {MAX_BLOCK_SIZE}]: {block_size}")
        if not 1 <= block_count <= MAX_BLOCK_COUNT:
            raise ValueError(
                f"block_count must be in [1, {MAX_BLOCK_COUNT}]: {block_count}")
        if request.variant == schema.VARIANT_WORD32 and block_size % 4:
            raise ValueError(
                f"word32 blocks need a size divisible by 4: {block_size}")
        for sequence, payload in enumerate(
                payload_stream(request.seed, block_size, block_count)):
            if request.variant == schema.VARIANT_WORD32:
                block = schema.StreamBlock(
                    sequence=sequence,
                    words=schema.WordArray(values=bytes_to_words(payload)))
            else:
                block = schema.StreamBlock(sequence=sequence, bytes=payload)
            yield block

    @rpc_method
    def StreamWrite(self, request_iterator, context):
        blocks = 0
        total = 0
        crc = 0
        for block in request_iterator:
            if block.sequence != blocks:
                raise ValueError(
                    f"sequence gap: expected {blocks}, got {block.sequence}")
            kind = block.WhichOneof("payload")
            if kind == "bytes":
                payload = block.bytes
            elif kind == "words":
                payload = words_to_bytes(block.words.values)
            else:
                raise ValueError("stream block carries no payload")
            blocks += 1
            total += len(payload)
            crc = zlib.crc32(payload, crc)
        return schema.StreamSummary(blocks=blocks, bytes=total, crc32=crc)


class StreamPlugin(Plugin):
    def services(self) -> list[RpcService]:
        return [RpcService(
            schema.STREAM_SERVICE,
            schema.service_handler(schema.STREAM_SERVICE,
                                   _StreamServicer(self)))]


def construct(config, logger, ctx: HubContext) -> StreamPlugin:
    return StreamPlugin(config, logger, ctx)


def destruct(plugin: StreamPlugin) -> None:
    plugin.stop()
