"""Endpoint layer: uniform device access over register windows and
sysfs-style attribute directories.

Each device-tree node maps to exactly one endpoint. Platform endpoints
give typed (8/16/32/64 bit), bit-field and array access over a
bounds-checked register window; sysfs endpoints read and write decimal
text attribute files. Endpoints carry their own reentrant lock, a
generation counter bumped on reload, and fail closed after a backend
fault until reloaded.
"""

from __future__ import annotations

import logging
import random
import threading
from pathlib import Path
from typing import Callable, Sequence

from .devicetree import DeviceNode, match_sysfs
from .errors import (
    BackendFaultError,
    BackendUnavailableError,
    DecodeError,
    MisalignedError,
    NoSuchAttributeError,
    OutOfRangeError,
    ValueTooWideError,
)
from .sim import WORD_BYTES, WORD_MASK, RegisterWindow, SimBackend

logger = logging.getLogger(__name__)

VALID_WIDTHS = (8, 16, 32, 64)


class Endpoint:
    """Shared endpoint behaviour: lock, failure latch, reload."""

    kind = "endpoint"

    def __init__(
        self,
        node: DeviceNode,
        on_fault: Callable[[str, str], None] | None = None,
        on_recover: Callable[[str], None] | None = None,
    ):
        self.node = node
        self.label = node.label
        self.lock = threading.RLock()
        self.generation = 0
        self._failed = False
        self._fault_reason = ""
        self._on_fault = on_fault
        self._on_recover = on_recover

    @property
    def failed(self) -> bool:
        return self._failed

    @property
    def fault_reason(self) -> str:
        return self._fault_reason

    def _guard(self) -> None:
        if self._failed:
            raise BackendUnavailableError(
                f"endpoint {self.label} is failed ({self._fault_reason}); "
                f"reload required")

    def _trip(self, exc: BaseException) -> None:
        self._failed = True
        self._fault_reason = str(exc)
        logger.error("endpoint %s failed: %s", self.label, exc)
        if self._on_fault is not None:
            self._on_fault(self.label, self._fault_reason)

    def _reset_backend(self) -> None:
        pass

    def reload(self) -> None:
        """Clear the failure latch, reattach to the backend, bump generation."""
        with self.lock:
            self._reset_backend()
            self._failed = False
            self._fault_reason = ""
            self.generation += 1
            logger.info("endpoint %s reloaded (generation %d)",
                        self.label, self.generation)
        if self._on_recover is not None:
            self._on_recover(self.label)


def _shuffled(count: int, rng: random.Random | None) -> list[int]:
    indices = list(range(count))
    (rng or random).shuffle(indices)
    return indices


def _check_width(width: int) -> None:
    if width not in VALID_WIDTHS:
        raise MisalignedError(f"unsupported access width: {width}")


def _check_value(value: int, width: int) -> None:
    if not 0 <= value < (1 << width):
        raise ValueTooWideError(
            f"value {value:#x} does not fit in {width} bits")


class PlatformEndpoint(Endpoint):
    """Typed register access over a memory window.

    Addresses are byte offsets into the window and must be aligned to
    the access width. 64-bit values occupy two consecutive words,
    low word first. Sub-word writes are a single masked read-modify-write
    backend call; 64-bit accesses are a single two-word call.
    """

    kind = "platform"

    def __init__(
        self,
        node: DeviceNode,
        window: RegisterWindow,
        remap: Callable[[], RegisterWindow] | None = None,
        reset_hook: Callable[[], None] | None = None,
        on_fault: Callable[[str, str], None] | None = None,
        on_recover: Callable[[str], None] | None = None,
    ):
        super().__init__(node, on_fault, on_recover)
        self._window = window
        self._remap = remap
        self._reset_hook = reset_hook

    @property
    def size_bytes(self) -> int:
        return self._window.n_words * WORD_BYTES

    def _reset_backend(self) -> None:
        if self._reset_hook is not None:
            self._reset_hook()
        if self._remap is not None:
            self._window = self._remap()

    def _span(self, address: int, width: int, count: int) -> None:
        _check_width(width)
        nbytes = width // 8
        if address % nbytes:
            raise MisalignedError(
                f"{self.label}: address {address:#x} not aligned to "
                f"{width}-bit access")
        if count < 1:
            raise OutOfRangeError(f"{self.label}: count must be >= 1")
        if address < 0 or address + nbytes * count > self.size_bytes:
            raise OutOfRangeError(
                f"{self.label}: span [{address:#x}, +{nbytes * count:#x}) "
                f"outside window of {self.size_bytes:#x} bytes")

    def _call(self, fn, *args):
        try:
            return fn(*args)
        except BackendFaultError as exc:
            self._trip(exc)
            raise

    # scalar access

    def read(self, address: int, width: int = 32) -> int:
        with self.lock:
            self._guard()
            self._span(address, width, 1)
            index = address // WORD_BYTES
            if width == 64:
                lo, hi = self._call(self._window.read_words, index, 2)
                return lo | hi << 32
            word = self._call(self._window.read_words, index, 1)[0]
            if width == 32:
                return word
            shift = (address % WORD_BYTES) * 8
            return (word >> shift) & ((1 << width) - 1)

    def write(self, address: int, value: int, width: int = 32) -> None:
        with self.lock:
            self._guard()
            self._span(address, width, 1)
            _check_value(value, width)
            index = address // WORD_BYTES
            if width == 64:
                self._call(self._window.write_words, index,
                           [value & WORD_MASK, value >> 32])
            elif width == 32:
                self._call(self._window.write_words, index, [value])
            else:
                shift = (address % WORD_BYTES) * 8
                mask = ((1 << width) - 1) << shift
                self._call(self._window.write_masked, index, mask, value << shift)

    # array access

    def read_many(self, address: int, width: int, count: int,
                  order: str = "seq",
                  rng: random.Random | None = None) -> list[int]:
        """Read count consecutive elements.

        order="seq" is one contiguous backend call; order="random"
        performs independent single-element accesses in shuffled address
        order, the access pattern used for single-access benchmarking.
        """
        if order == "random":
            with self.lock:
                self._span(address, width, count)
                nbytes = width // 8
                out = [0] * count
                for i in _shuffled(count, rng):
                    out[i] = self.read(address + i * nbytes, width)
                return out
        if order != "seq":
            raise ValueError(f"unknown access order: {order!r}")
        with self.lock:
            self._guard()
            self._span(address, width, count)
            nbytes = width // 8
            first = address // WORD_BYTES
            last = (address + nbytes * count - 1) // WORD_BYTES
            words = self._call(self._window.read_words, first, last - first + 1)
            if width == 32:
                return words
            if width == 64:
                return [words[2 * i] | words[2 * i + 1] << 32
                        for i in range(count)]
            out = []
            mask = (1 << width) - 1
            for i in range(count):
                byte = address + i * nbytes
                shift = (byte % WORD_BYTES) * 8
                out.append((words[byte // WORD_BYTES - first] >> shift) & mask)
            return out

    def write_many(self, address: int, width: int, values: Sequence[int],
                   order: str = "seq",
                   rng: random.Random | None = None) -> None:
        """Write consecutive elements with as few backend calls as possible.

        Word-multiple widths take one call; sub-word runs take one masked
        call per boundary word plus one call for the full words between.
        order="random" instead issues independent single-element writes
        in shuffled address order (benchmarking pattern).
        """
        if order == "random":
            with self.lock:
                count = len(values)
                self._span(address, width, count)
                for v in values:
                    _check_value(v, width)
                nbytes = width // 8
                for i in _shuffled(count, rng):
                    self.write(address + i * nbytes, values[i], width)
                return
        if order != "seq":
            raise ValueError(f"unknown access order: {order!r}")
        with self.lock:
            self._guard()
            count = len(values)
            self._span(address, width, count)
            for v in values:
                _check_value(v, width)
            if width == 32:
                self._call(self._window.write_words, address // WORD_BYTES,
                           list(values))
                return
            if width == 64:
                flat: list[int] = []
                for v in values:
                    flat += [v & WORD_MASK, v >> 32]
                self._call(self._window.write_words, address // WORD_BYTES, flat)
                return
            nbytes = width // 8
            per_word: dict[int, tuple[int, int]] = {}
            for i, v in enumerate(values):
                byte = address + i * nbytes
                shift = (byte % WORD_BYTES) * 8
                index = byte // WORD_BYTES
                mask, acc = per_word.get(index, (0, 0))
                per_word[index] = (mask | ((1 << width) - 1) << shift,
                                   acc | v << shift)
            run_start = None
            run_values: list[int] = []
            for index in sorted(per_word):
                mask, acc = per_word[index]
                if mask == WORD_MASK:
                    if run_start is None:
                        run_start = index
                    run_values.append(acc)
                    continue
                if run_start is not None:
                    self._call(self._window.write_words, run_start, run_values)
                    run_start, run_values = None, []
                self._call(self._window.write_masked, index, mask, acc)
            if run_start is not None:
                self._call(self._window.write_words, run_start, run_values)

    # bit-field access (32-bit word granularity)

    def _bit_args(self, address: int, offset: int, nbits: int) -> int:
        if address % WORD_BYTES:
            raise MisalignedError(
                f"{self.label}: bit access needs a word-aligned address")
        if not 1 <= nbits <= 32 or not 0 <= offset < 32 or offset + nbits > 32:
            raise OutOfRangeError(
                f"{self.label}: bit field {offset}+:{nbits} exceeds one word")
        self._span(address, 32, 1)
        return address // WORD_BYTES

    def read_bits(self, address: int, offset: int, nbits: int) -> int:
        with self.lock:
            self._guard()
            index = self._bit_args(address, offset, nbits)
            word = self._call(self._window.read_words, index, 1)[0]
            return (word >> offset) & ((1 << nbits) - 1)

    def write_bits(self, address: int, offset: int, nbits: int, value: int) -> None:
        """Update a bit field with one masked read-modify-write call."""
        with self.lock:
            self._guard()
            index = self._bit_args(address, offset, nbits)
            _check_value(value, nbits)
            mask = ((1 << nbits) - 1) << offset
            self._call(self._window.write_masked, index, mask, value << offset)

    def set_mask(self, address: int, mask: int) -> None:
        with self.lock:
            self._guard()
            index = self._bit_args(address, 0, 32)
            _check_value(mask, 32)
            self._call(self._window.write_masked, index, mask, mask)

    def clear_mask(self, address: int, mask: int) -> None:
        with self.lock:
            self._guard()
            index = self._bit_args(address, 0, 32)
            _check_value(mask, 32)
            self._call(self._window.write_masked, index, mask, 0)

    def write_read(self, address: int, value: int, width: int = 32) -> int:
        """Write then read back the same location without releasing the lock."""
        with self.lock:
            self.write(address, value, width)
            return self.read(address, width)


class SysfsEndpoint(Endpoint):
    """Attribute access over a directory of decimal text files.

    Attribute names must be plain file names; anything resolving outside
    the endpoint directory is rejected. Values are integers serialized
    as decimal with a trailing newline.
    """

    kind = "sysfs"

    def __init__(
        self,
        node: DeviceNode,
        directory: str | Path,
        ranges: dict[str, tuple[int, int]] | None = None,
        delay_hook: Callable[[str], None] | None = None,
        reset_hook: Callable[[], None] | None = None,
        on_fault: Callable[[str, str], None] | None = None,
        on_recover: Callable[[str], None] | None = None,
    ):
        super().__init__(node, on_fault, on_recover)
        self.dir = Path(directory)
        if not self.dir.is_dir():
            raise BackendUnavailableError(
                f"endpoint {node.label}: attribute directory does not exist: "
                f"{self.dir}")
        self._ranges = dict(ranges or {})
        self._delay_hook = delay_hook
        self._reset_hook = reset_hook

    def _reset_backend(self) -> None:
        if self._reset_hook is not None:
            self._reset_hook()

    def _attr_path(self, name: str) -> Path:
        if not name or "/" in name or "\\" in name or name in (".", ".."):
            raise NoSuchAttributeError(f"{self.label}: illegal attribute name {name!r}")
        path = self.dir / name
        if path.resolve().parent != self.dir.resolve():
            raise NoSuchAttributeError(
                f"{self.label}: attribute {name!r} escapes the endpoint directory")
        if not path.is_file():
            raise NoSuchAttributeError(f"{self.label}: no attribute {name!r}")
        return path

    def _delay(self, op: str) -> None:
        if self._delay_hook is not None:
            try:
                self._delay_hook(op)
            except BackendFaultError as exc:
                self._trip(exc)
                raise

    def list_attrs(self) -> list[str]:
        with self.lock:
            self._guard()
            return sorted(p.name for p in self.dir.iterdir() if p.is_file())

    def read_attr(self, name: str) -> int:
        with self.lock:
            self._guard()
            path = self._attr_path(name)
            self._delay("r")
            text = path.read_text()
            try:
                return int(text.strip())
            except ValueError:
                raise DecodeError(
                    f"{self.label}: attribute {name!r} holds non-decimal "
                    f"content {text!r}") from None

    def write_attr(self, name: str, value: int) -> None:
        with self.lock:
            self._guard()
            path = self._attr_path(name)
            if name in self._ranges:
                lo, hi = self._ranges[name]
                if not lo <= value <= hi:
                    raise ValueTooWideError(
                        f"{self.label}: value {value} outside [{lo}, {hi}] "
                        f"for attribute {name!r}")
            self._delay("w")
            path.write_text(f"{value}\n")

    def write_read_attr(self, name: str, value: int) -> int:
        """Write then read back the same attribute without releasing the lock."""
        with self.lock:
            self.write_attr(name, value)
            return self.read_attr(name)


def make_endpoints(
    nodes: Sequence[DeviceNode],
    backend: SimBackend,
    on_fault: Callable[[str, str], None] | None = None,
    on_recover: Callable[[str], None] | None = None,
) -> dict[str, Endpoint]:
    """Instantiate one endpoint per device-tree node, preserving order."""
    endpoints: dict[str, Endpoint] = {}
    for node in nodes:
        if node.is_platform:
            if node.is_sysfs:
                logger.warning(
                    "node %s has both reg= and sysfs=; using the register window",
                    node.label)
            base, size = node.reg_base, node.reg_size
            window = backend.map_window(base, size)
            region_label = window.label
            endpoints[node.label] = PlatformEndpoint(
                node,
                window,
                remap=lambda base=base, size=size: backend.map_window(base, size),
                reset_hook=lambda label=region_label: backend.clear_fault(label),
                on_fault=on_fault,
                on_recover=on_recover,
            )
        else:
            if node.sysfs == "auto":
                matched = match_sysfs(node, backend.sysfs_root)
                if matched is None:
                    raise BackendUnavailableError(
                        f"node {node.label}: no driver directory found under "
                        f"{backend.sysfs_root}")
                directory = matched
            else:
                directory = backend.sysfs_root / node.sysfs
            ranges = None
            delay_hook = None
            reset_hook = None
            if node.label == backend.dac.label:
                ranges = backend.attr_ranges(node.label)
                delay_hook = (lambda op, label=node.label:
                              backend.attr_delay(label, op))
                reset_hook = (lambda label=node.label:
                              backend.clear_fault(label))
            endpoints[node.label] = SysfsEndpoint(
                node,
                directory,
                ranges=ranges,
                delay_hook=delay_hook,
                reset_hook=reset_hook,
                on_fault=on_fault,
                on_recover=on_recover,
            )
    return endpoints
