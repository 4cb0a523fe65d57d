"""Benchmark harness: endpoint latency, client RPC latency, streaming
throughput and attribute latency, with quantile statistics and CSV output.

Latency cells time single operations; size-1 register cells target a
fresh random (width-aligned) address per repetition so results do not
depend on ascending or descending access patterns. Every cell discards
WARMUP iterations before sampling.
"""

from __future__ import annotations

import math
import random
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import grpc

from .clock import Clock, MonotonicClock, VirtualClock
from .devicetree import parse_device_tree
from .endpoints import PlatformEndpoint, SysfsEndpoint, make_endpoints
from .errors import ConfigError, UnreachableError
from .plugins.streams import payload_stream, words_to_bytes
from .rpc import schema
from .sim import SimBackend

WARMUP = 32
CSV_HEADER = "size,n,mean_ns,std_ns,min_ns,q25_ns,median_ns,q75_ns,q99_ns,max_ns"
OUTLIER_HEADER = "size,outlier_ns"

KINDS = ("ep-latency", "client-latency", "throughput", "attr-latency")
DIRECTIONS = ("r", "w", "wr")
VARIANTS = ("byte", "word32")

_VALUE_MIX = 0x9E3779B1  # golden-ratio stride gives distinct word patterns


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str
    sizes: tuple[int, ...]
    repetitions: int
    direction: str = "r"
    width: int = 32
    variant: str = "byte"
    blocks: int = 256
    virtual_clock: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown workload kind: {self.kind!r}")
        if self.repetitions < 2:
            raise ConfigError(
                f"repetitions must be >= 2, got {self.repetitions}")
        if not self.sizes:
            raise ConfigError("sizes must be non-empty")
        if any(s < 1 for s in self.sizes):
            raise ConfigError("sizes must be >= 1")
        if any(b >= a for b, a in zip(self.sizes, self.sizes[1:])):
            raise ConfigError(f"sizes must be strictly increasing: {self.sizes}")
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"direction must be one of {DIRECTIONS}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if self.kind == "throughput":
            if self.blocks < 1:
                raise ConfigError("throughput needs blocks >= 1")
            if self.direction == "wr":
                raise ConfigError("throughput direction is r or w")


@dataclass(frozen=True)
class BenchRecord:
    size: int
    n: int
    mean_ns: float
    std_ns: float
    min_ns: float
    q25_ns: float
    median_ns: float
    q75_ns: float
    q99_ns: float
    max_ns: float
    outliers: tuple[float, ...] = ()


def quantile(sorted_values: Sequence[float], q: float) -> float:
    """Linear-interpolated quantile over pre-sorted data."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("quantile of empty data")
    if n == 1:
        return float(sorted_values[0])
    position = q * (n - 1)
    lo = math.floor(position)
    hi = min(lo + 1, n - 1)
    frac = position - lo
    return float(sorted_values[lo]) + frac * (
        float(sorted_values[hi]) - float(sorted_values[lo]))


def compute_stats(size: int, samples: Sequence[float]) -> BenchRecord:
    n = len(samples)
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    data = sorted(float(x) for x in samples)
    mean = math.fsum(data) / n
    std = math.sqrt(math.fsum((x - mean) ** 2 for x in data) / (n - 1))
    q99 = quantile(data, 0.99)
    return BenchRecord(
        size=size,
        n=n,
        mean_ns=mean,
        std_ns=std,
        min_ns=data[0],
        q25_ns=quantile(data, 0.25),
        median_ns=quantile(data, 0.50),
        q75_ns=quantile(data, 0.75),
        q99_ns=q99,
        max_ns=data[-1],
        outliers=tuple(x for x in data if x > q99),
    )


def _time_cell(clock: Clock, op: Callable[[], None], reps: int) -> list[float]:
    for _ in range(WARMUP):
        op()
    samples = []
    for _ in range(reps):
        start = clock.now_ns()
        op()
        samples.append(float(clock.now_ns() - start))
    return samples


def _pattern(size: int, width: int) -> list[int]:
    mask = (1 << width) - 1
    return [(i * _VALUE_MIX) & mask for i in range(size)]


def _bench_backend(virtual: bool) -> SimBackend:
    backend = SimBackend(clock=VirtualClock() if virtual else MonotonicClock())
    if virtual:
        # the virtual-clock mode is the deterministic reference: means
        # must equal the model's closed form, so stochastic terms go
        backend.scrub_stochastic()
    return backend


# ---------------------------------------------------------------------------
# endpoint-direct cells
# ---------------------------------------------------------------------------

def run_ep_latency(spec: WorkloadSpec,
                   backend: SimBackend | None = None) -> list[BenchRecord]:
    """Time endpoint array accesses directly, no RPC layer involved."""
    owns = backend is None
    if owns:
        backend = _bench_backend(spec.virtual_clock)
    try:
        nodes = parse_device_tree(backend.device_tree_text(), origin="sim")
        eps = make_endpoints(nodes, backend)
        ep = next(e for e in eps.values() if isinstance(e, PlatformEndpoint))
        rng = random.Random(0xBE7C4)
        nbytes = spec.width // 8
        records = []
        for size in spec.sizes:
            values = _pattern(size, spec.width)
            span = size * nbytes
            if span > ep.size_bytes:
                raise ConfigError(
                    f"size {size} x {spec.width} bit exceeds the "
                    f"{ep.size_bytes}-byte window")
            top = ep.size_bytes - span

            def op(size=size, values=values, top=top):
                address = rng.randrange(0, top + nbytes, nbytes) if size == 1 else 0
                if spec.direction in ("w", "wr"):
                    ep.write_many(address, spec.width, values)
                if spec.direction in ("r", "wr"):
                    ep.read_many(address, spec.width, size)

            records.append(compute_stats(
                size, _time_cell(backend.clock, op, spec.repetitions)))
        return records
    finally:
        if owns:
            backend.close()


def run_attr_latency(spec: WorkloadSpec,
                     target: str | None = None,
                     attribute: str = "raw0",
                     endpoint: str = "dac0",
                     deadline_s: float = 10.0) -> list[BenchRecord]:
    """Time attribute accesses; endpoint-direct or over RPC when a
    target is given. Attribute cells have no array dimension, so the
    record size column is fixed at 1."""
    counter = iter(range(1, 1 << 30))
    if target is None:
        backend = _bench_backend(spec.virtual_clock)
        try:
            nodes = parse_device_tree(backend.device_tree_text(), origin="sim")
            eps = make_endpoints(nodes, backend)
            ep = next(e for e in eps.values() if isinstance(e, SysfsEndpoint))

            def op():
                value = next(counter) & 0xFFFF
                if spec.direction == "r":
                    ep.read_attr(attribute)
                elif spec.direction == "w":
                    ep.write_attr(attribute, value)
                else:
                    ep.write_read_attr(attribute, value)

            return [compute_stats(
                1, _time_cell(backend.clock, op, spec.repetitions))]
        finally:
            backend.close()

    with _RawClient(target) as client:
        method = {"r": client.read_attr, "w": client.write_attr,
                  "wr": client.write_read_attr}[spec.direction]

        def op():
            value = next(counter) & 0xFFFF
            method(schema.AttrRequest(endpoint=endpoint, attribute=attribute,
                                      value=value), timeout=deadline_s)

        clock = MonotonicClock()
        return [compute_stats(1, _time_cell(clock, op, spec.repetitions))]


# ---------------------------------------------------------------------------
# client-path cells
# ---------------------------------------------------------------------------

class _RawClient:
    """Minimal stub bundle for benchmark traffic."""

    def __init__(self, target: str, connect_timeout_s: float = 5.0):
        self.channel = grpc.insecure_channel(target)
        try:
            grpc.channel_ready_future(self.channel).result(
                timeout=connect_timeout_s)
        except grpc.FutureTimeoutError:
            self.channel.close()
            raise UnreachableError(f"no daemon reachable at {target}") from None

        def unary(service: str, method: str, response):
            return self.channel.unary_unary(
                f"/{service}/{method}",
                request_serializer=lambda m: m.SerializeToString(),
                response_deserializer=response.FromString)

        self.read_registers = unary(schema.REGISTER_SERVICE, "ReadRegisters",
                                    schema.RegisterResponse)
        self.write_registers = unary(schema.REGISTER_SERVICE, "WriteRegisters",
                                     schema.RegisterResponse)
        self.write_read_registers = unary(schema.REGISTER_SERVICE,
                                          "WriteReadRegisters",
                                          schema.RegisterResponse)
        self.read_attr = unary(schema.ATTR_SERVICE, "ReadAttr",
                               schema.AttrResponse)
        self.write_attr = unary(schema.ATTR_SERVICE, "WriteAttr",
                                schema.AttrResponse)
        self.write_read_attr = unary(schema.ATTR_SERVICE, "WriteReadAttr",
                                     schema.AttrResponse)
        self.stream_read = self.channel.unary_stream(
            f"/{schema.STREAM_SERVICE}/StreamRead",
            request_serializer=lambda m: m.SerializeToString(),
            response_deserializer=schema.StreamBlock.FromString)
        self.stream_write = self.channel.stream_unary(
            f"/{schema.STREAM_SERVICE}/StreamWrite",
            request_serializer=lambda m: m.SerializeToString(),
            response_deserializer=schema.StreamSummary.FromString)

    def __enter__(self) -> "_RawClient":
        return self

    def __exit__(self, *exc) -> None:
        self.channel.close()


def run_client_latency(spec: WorkloadSpec,
                       target: str,
                       endpoint: str = "regs0",
                       window_bytes: int = 0x1000,
                       deadline_s: float = 10.0) -> list[BenchRecord]:
    """Time register RPCs from the client side over a live daemon."""
    clock = MonotonicClock()
    rng = random.Random(0xC11E47)
    nbytes = spec.width // 8
    with _RawClient(target) as client:
        method = {"r": client.read_registers,
                  "w": client.write_registers,
                  "wr": client.write_read_registers}[spec.direction]
        records = []
        for size in spec.sizes:
            values = _pattern(size, spec.width) if spec.direction != "r" else []
            top = window_bytes - size * nbytes

            def op(size=size, values=values, top=top):
                address = rng.randrange(0, top + nbytes, nbytes) if size == 1 else 0
                method(schema.RegisterRequest(
                    endpoint=endpoint, address=address, width=spec.width,
                    count=size, values=values), timeout=deadline_s)

            records.append(compute_stats(
                size, _time_cell(clock, op, spec.repetitions)))
        return records


def run_throughput(spec: WorkloadSpec,
                   target: str,
                   deadline_s: float = 120.0,
                   ) -> tuple[list[BenchRecord], list[tuple[int, float]]]:
    """Stream blocks and measure payload throughput.

    direction "r" consumes StreamRead and verifies payload CRC against
    the locally regenerated stream; "w" drives StreamWrite and verifies
    the server's summary. Returns per-size wall-time records plus
    (block_size, Mbit/s) rates derived from the means.
    """
    variant = (schema.VARIANT_WORD32 if spec.variant == "word32"
               else schema.VARIANT_BYTES)
    clock = MonotonicClock()
    records = []
    rates = []
    with _RawClient(target) as client:
        for size in spec.sizes:
            if spec.variant == "word32" and size % 4:
                raise ConfigError(f"word32 block size must be divisible by 4: {size}")
            samples = []
            for run in range(spec.repetitions):
                seed = run
                expected_crc = 0
                for payload in payload_stream(seed, size, spec.blocks):
                    expected_crc = zlib.crc32(payload, expected_crc)
                request = schema.StreamRequest(
                    block_size=size, block_count=spec.blocks,
                    variant=variant, seed=seed)
                if spec.direction == "r":
                    start = clock.now_ns()
                    crc = 0
                    expected_seq = 0
                    total = 0
                    for block in client.stream_read(request, timeout=deadline_s):
                        if block.sequence != expected_seq:
                            raise ConfigError(
                                f"stream gap at block {expected_seq}")
                        expected_seq += 1
                        if block.WhichOneof("payload") == "words":
                            payload = words_to_bytes(block.words.values)
                        else:
                            payload = block.bytes
                        total += len(payload)
                        crc = zlib.crc32(payload, crc)
                    elapsed = clock.now_ns() - start
                    if total != size * spec.blocks:
                        raise ConfigError(
                            f"stream returned {total} bytes, expected "
                            f"{size * spec.blocks}")
                    if crc != expected_crc:
                        raise ConfigError(
                            f"stream CRC mismatch: {crc:#010x} != "
                            f"{expected_crc:#010x}")
                else:
                    def blocks(seed=seed):
                        for sequence, payload in enumerate(
                                payload_stream(seed, size, spec.blocks)):
                            if variant == schema.VARIANT_WORD32:
                                yield schema.StreamBlock(
                                    sequence=sequence,
                                    words=schema.WordArray(
                                        values=list(_le_words(payload))))
                            else:
                                yield schema.StreamBlock(
                                    sequence=sequence, bytes=payload)

                    start = clock.now_ns()
                    summary = client.stream_write(blocks(), timeout=deadline_s)
                    elapsed = clock.now_ns() - start
                    if summary.bytes != size * spec.blocks:
                        raise ConfigError(
                            f"server counted {summary.bytes} bytes, expected "
                            f"{size * spec.blocks}")
                    if summary.crc32 != expected_crc:
                        raise ConfigError(
                            f"stream CRC mismatch: {summary.crc32:#010x} != "
                            f"{expected_crc:#010x}")
                samples.append(float(elapsed))
            record = compute_stats(size, samples)
            records.append(record)
            rates.append((size, _mbit_per_s(size * spec.blocks, record.mean_ns)))
    return records, rates


def _le_words(payload: bytes):
    for i in range(0, len(payload), 4):
        yield int.from_bytes(payload[i:i + 4], "little")


def _mbit_per_s(payload_bytes: int, wall_ns: float) -> float:
    return payload_bytes * 8 / (wall_ns / 1e9) / 1e6


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return repr(float(value))


def emit_csv(records: Sequence[BenchRecord], path: str | Path) -> None:
    """Write records and their outliers; identical input gives identical
    bytes. Outliers go to the sibling file <path>.outliers.csv."""
    path = Path(path)
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join([
            str(r.size), str(r.n),
            _fmt(r.mean_ns), _fmt(r.std_ns), _fmt(r.min_ns), _fmt(r.q25_ns),
            _fmt(r.median_ns), _fmt(r.q75_ns), _fmt(r.q99_ns), _fmt(r.max_ns),
        ]))
    path.write_text("\n".join(lines) + "\n")

    outlier_lines = [OUTLIER_HEADER]
    for r in records:
        for value in r.outliers:
            outlier_lines.append(f"{r.size},{_fmt(value)}")
    Path(f"{path}.outliers.csv").write_text("\n".join(outlier_lines) + "\n")
