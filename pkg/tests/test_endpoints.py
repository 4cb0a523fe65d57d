"""Endpoint access semantics against an independent byte-level oracle."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hubd.clock import VirtualClock
from hubd.devicetree import parse_device_tree
from hubd.endpoints import PlatformEndpoint, SysfsEndpoint, make_endpoints
from hubd.errors import (
    BackendFaultError,
    BackendUnavailableError,
    DecodeError,
    MisalignedError,
    NoSuchAttributeError,
    OutOfRangeError,
    ValueTooWideError,
)
from hubd.sim import SimBackend

WINDOW = 0x1000


class ShadowMap:
    """Plain little-endian byte array; knows nothing of word storage."""

    def __init__(self, size: int, init_pattern: int = 0):
        self.mem = bytearray()
        for i in range(size // 4):
            self.mem += ((init_pattern + i) & 0xFFFFFFFF).to_bytes(4, "little")

    def read(self, address: int, width: int) -> int:
        return int.from_bytes(self.mem[address:address + width // 8], "little")

    def write(self, address: int, value: int, width: int) -> None:
        self.mem[address:address + width // 8] = value.to_bytes(width // 8,
                                                                "little")

    def read_bits(self, address: int, offset: int, nbits: int) -> int:
        return (self.read(address, 32) >> offset) & ((1 << nbits) - 1)

    def write_bits(self, address: int, offset: int, nbits: int,
                   value: int) -> None:
        mask = ((1 << nbits) - 1) << offset
        word = self.read(address, 32)
        self.write(address, (word & ~mask) | (value << offset), 32)

    def dump(self) -> bytes:
        return bytes(self.mem)


@pytest.fixture
def backend():
    b = SimBackend(clock=VirtualClock())
    yield b
    b.close()


@pytest.fixture
def ep(backend) -> PlatformEndpoint:
    nodes = parse_device_tree(backend.device_tree_text(), origin="sim")
    return make_endpoints(nodes, backend)["regs0"]


def ep_dump(ep: PlatformEndpoint) -> bytes:
    words = ep.read_many(0, 32, ep.size_bytes // 4)
    return b"".join(w.to_bytes(4, "little") for w in words)


class CountingWindow:
    """Pass-through window that records every backend call."""

    def __init__(self, inner):
        self.inner = inner
        self.calls: list[tuple] = []

    @property
    def n_words(self):
        return self.inner.n_words

    @property
    def label(self):
        return self.inner.label

    def read_words(self, index, count):
        self.calls.append(("r", index, count))
        return self.inner.read_words(index, count)

    def write_words(self, index, values):
        self.calls.append(("w", index, len(values)))
        self.inner.write_words(index, values)

    def write_masked(self, index, mask, value):
        self.calls.append(("m", index, mask))
        self.inner.write_masked(index, mask, value)


@pytest.fixture
def counted(backend):
    nodes = parse_device_tree(backend.device_tree_text(), origin="sim")
    node = nodes[0]
    window = CountingWindow(backend.map_window(node.reg_base, node.reg_size))
    return PlatformEndpoint(node, window), window


# --- basic semantics -------------------------------------------------------

def test_fresh_contents_follow_init_pattern(ep):
    assert ep.read(0, 32) == 0
    assert ep.read(4, 32) == 1
    assert ep.read(8, 8) == 2
    assert ep.read(0, 64) == (1 << 32) | 0


def test_write_through_visibility(ep):
    ep.write(0x10, 0xDEADBEEF, 32)
    assert ep.read(0x10, 32) == 0xDEADBEEF


def test_64bit_is_two_little_endian_words(ep):
    ep.write(0x20, 0x1122334455667788, 64)
    assert ep.read(0x20, 32) == 0x55667788
    assert ep.read(0x24, 32) == 0x11223344


@pytest.mark.parametrize("width,address", [(16, 1), (32, 2), (64, 4), (8, -1)])
def test_misaligned_or_negative_rejected(ep, width, address):
    with pytest.raises((MisalignedError, OutOfRangeError)):
        ep.read(address, width)


def test_unsupported_width_rejected(ep):
    with pytest.raises(MisalignedError):
        ep.read(0, 24)


def test_bounds_rejected(ep):
    with pytest.raises(OutOfRangeError):
        ep.read(WINDOW, 32)
    with pytest.raises(OutOfRangeError):
        ep.read_many(WINDOW - 4, 32, 2)
    with pytest.raises(OutOfRangeError):
        ep.read(WINDOW, 8)
    with pytest.raises(OutOfRangeError):
        ep.write(WINDOW, 0, 64)


def test_value_too_wide(ep):
    with pytest.raises(ValueTooWideError):
        ep.write(0, 1 << 32, 32)
    with pytest.raises(ValueTooWideError):
        ep.write(0, 256, 8)
    with pytest.raises(ValueTooWideError):
        ep.write_bits(0, 0, 4, 0x10)


def test_failed_array_write_leaves_no_partial_state(ep):
    before = ep_dump(ep)
    with pytest.raises(OutOfRangeError):
        ep.write_many(WINDOW - 8, 32, [1, 2, 3])
    assert ep_dump(ep) == before


def test_array_roundtrip_256_words(ep):
    rng = random.Random(1)
    values = [rng.getrandbits(32) for _ in range(256)]
    ep.write_many(0x100, 32, values)
    assert ep.read_many(0x100, 32, 256) == values


def test_count_one_equals_scalar(ep):
    ep.write(0x40, 0xCAFEF00D, 32)
    assert ep.read_many(0x40, 32, 1) == [ep.read(0x40, 32)]


def test_write_read_holds_value(ep):
    assert ep.write_read(0x8, 0xA5A5A5A5, 32) == 0xA5A5A5A5


# --- bit fields ------------------------------------------------------------

def test_read_bits_example(ep):
    ep.write(0x0, 0xDEADBEEF, 32)
    assert ep.read_bits(0x0, 8, 8) == 0xBE


def test_write_bits_example(ep):
    ep.write(0x4, 0, 32)
    ep.write_bits(0x4, 4, 4, 0xF)
    assert ep.read(0x4, 32) == 0xF0


def test_bit_args_validated(ep):
    with pytest.raises(OutOfRangeError):
        ep.read_bits(0, 28, 8)
    with pytest.raises(OutOfRangeError):
        ep.read_bits(0, 0, 0)
    with pytest.raises(MisalignedError):
        ep.read_bits(2, 0, 4)


def test_set_and_clear_mask(ep):
    ep.write(0x8, 0x0F0F0F0F, 32)
    ep.set_mask(0x8, 0xF0000000)
    assert ep.read(0x8, 32) == 0xFF0F0F0F
    ep.clear_mask(0x8, 0x0000000F)
    assert ep.read(0x8, 32) == 0xFF0F0F00


def test_bit_field_non_interference(ep):
    rng = random.Random(7)
    for _ in range(100):
        offset = rng.randrange(32)
        nbits = rng.randrange(1, 33 - offset)
        before = ep.read(0x30, 32)
        value = rng.getrandbits(nbits)
        ep.write_bits(0x30, offset, nbits, value)
        after = ep.read(0x30, 32)
        mask = ((1 << nbits) - 1) << offset
        assert after & ~mask == before & ~mask
        assert (after & mask) >> offset == value


# --- backend call shapes ---------------------------------------------------

def test_subword_write_is_single_masked_call(counted):
    ep, window = counted
    ep.write(0x2, 0xAB, 8)
    assert window.calls == [("m", 0, 0x00FF0000)]


def test_64bit_access_is_single_two_word_call(counted):
    ep, window = counted
    ep.write(0x8, 0x0102030405060708, 64)
    ep.read(0x8, 64)
    assert window.calls == [("w", 2, 2), ("r", 2, 2)]


def test_write_bits_is_single_masked_call(counted):
    ep, window = counted
    ep.write_bits(0x0, 4, 8, 0x5A)
    assert window.calls == [("m", 0, 0xFF0)]


def test_array_read_is_single_call(counted):
    ep, window = counted
    ep.read_many(0x10, 32, 64)
    assert window.calls == [("r", 4, 64)]


def test_subword_array_write_decomposes_minimally(counted):
    ep, window = counted
    # elements at bytes 2..9: masked head, full middle word, masked tail
    ep.write_many(0x2, 16, [1, 2, 3, 4])
    assert window.calls == [
        ("m", 0, 0xFFFF0000),
        ("w", 1, 1),
        ("m", 2, 0x0000FFFF),
    ]


def test_random_order_array_matches_seq(counted):
    ep, window = counted
    values = list(range(100, 116))
    ep.write_many(0x0, 32, values, order="random", rng=random.Random(3))
    assert len([c for c in window.calls if c[0] == "w"]) == 16
    window.calls.clear()
    out = ep.read_many(0x0, 32, 16, order="random", rng=random.Random(4))
    assert out == values
    assert len(window.calls) == 16


def test_unknown_order_rejected(ep):
    with pytest.raises(ValueError):
        ep.read_many(0, 32, 4, order="zigzag")


# --- randomized equivalence against the shadow map -------------------------

@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_randomized_ops_match_shadow(data):
    backend = SimBackend(clock=VirtualClock())
    try:
        nodes = parse_device_tree(backend.device_tree_text(), origin="sim")
        ep = make_endpoints(nodes, backend)["regs0"]
        shadow = ShadowMap(WINDOW)
        for _ in range(data.draw(st.integers(10, 40))):
            op = data.draw(st.sampled_from(
                ["r", "w", "rb", "wb", "ra", "wa"]))
            if op in ("r", "w"):
                width = data.draw(st.sampled_from([8, 16, 32, 64]))
                nbytes = width // 8
                address = data.draw(st.integers(0, WINDOW // nbytes - 1)) * nbytes
                if op == "r":
                    assert ep.read(address, width) == shadow.read(address, width)
                else:
                    value = data.draw(st.integers(0, (1 << width) - 1))
                    ep.write(address, value, width)
                    shadow.write(address, value, width)
            elif op in ("rb", "wb"):
                address = data.draw(st.integers(0, WINDOW // 4 - 1)) * 4
                nbits = data.draw(st.integers(1, 32))
                offset = data.draw(st.integers(0, 32 - nbits))
                if op == "rb":
                    assert ep.read_bits(address, offset, nbits) == \
                        shadow.read_bits(address, offset, nbits)
                else:
                    value = data.draw(st.integers(0, (1 << nbits) - 1))
                    ep.write_bits(address, offset, nbits, value)
                    shadow.write_bits(address, offset, nbits, value)
            else:
                width = data.draw(st.sampled_from([8, 16, 32, 64]))
                nbytes = width // 8
                count = data.draw(st.integers(1, 32))
                address = data.draw(
                    st.integers(0, (WINDOW - count * nbytes) // nbytes)) * nbytes
                if op == "ra":
                    got = ep.read_many(address, width, count)
                    want = [shadow.read(address + i * nbytes, width)
                            for i in range(count)]
                    assert got == want
                else:
                    values = [data.draw(st.integers(0, (1 << width) - 1))
                              for _ in range(count)]
                    ep.write_many(address, width, values)
                    for i, v in enumerate(values):
                        shadow.write(address + i * nbytes, v, width)
        assert ep_dump(ep) == shadow.dump()
    finally:
        backend.close()


# --- faults and reload -----------------------------------------------------

def test_stuck_fault_ignores_writes(backend, ep):
    ep.write(0x0, 0x11111111, 32)
    backend.inject_fault("regs0", "stuck")
    ep.write(0x0, 0x22222222, 32)
    assert ep.read(0x0, 32) == 0x11111111
    backend.clear_fault("regs0")
    ep.write(0x0, 0x33333333, 32)
    assert ep.read(0x0, 32) == 0x33333333


def test_error_fault_trips_and_reload_recovers(backend, ep):
    events = []
    ep._on_fault = lambda label, reason: events.append(("fault", label))
    ep._on_recover = lambda label: events.append(("recover", label))
    backend.inject_fault("regs0", "error")
    with pytest.raises(BackendFaultError):
        ep.read(0, 32)
    assert ep.failed
    # failure latches: no further backend traffic
    with pytest.raises(BackendUnavailableError):
        ep.read(0, 32)
    generation = ep.generation
    ep.reload()
    assert ep.generation == generation + 1
    assert not ep.failed
    assert ep.read(0, 32) == 0
    assert events == [("fault", "regs0"), ("recover", "regs0")]


def test_other_endpoint_unaffected_by_fault(backend):
    nodes = parse_device_tree(backend.device_tree_text(), origin="sim")
    eps = make_endpoints(nodes, backend)
    backend.inject_fault("regs0", "error")
    with pytest.raises(BackendFaultError):
        eps["regs0"].read(0, 32)
    assert eps["regs1"].read(0, 32) == 0


# --- sysfs endpoints -------------------------------------------------------

@pytest.fixture
def dac(backend) -> SysfsEndpoint:
    nodes = parse_device_tree(backend.device_tree_text(), origin="sim")
    return make_endpoints(nodes, backend)["dac0"]


def test_fresh_dac_reads_zero(dac):
    assert dac.read_attr("raw0") == 0


def test_attr_roundtrip(dac):
    dac.write_attr("raw3", 0x7FFF)
    assert dac.read_attr("raw3") == 0x7FFF
    assert dac.write_read_attr("raw3", 1234) == 1234


def test_attr_list(dac):
    assert dac.list_attrs() == [f"raw{i}" for i in range(8)]


def test_missing_attribute(dac):
    with pytest.raises(NoSuchAttributeError):
        dac.read_attr("raw9")


def test_path_escape_rejected(dac):
    for name in ("../escape", "a/b", "..", "."):
        with pytest.raises(NoSuchAttributeError):
            dac.read_attr(name)


def test_garbage_content_decode_error(dac):
    (dac.dir / "raw0").write_text("not a number\n")
    with pytest.raises(DecodeError):
        dac.read_attr("raw0")


def test_dac_range_enforced(dac):
    with pytest.raises(ValueTooWideError):
        dac.write_attr("raw0", 0x10000)
    with pytest.raises(ValueTooWideError):
        dac.write_attr("raw0", -1)


def test_sysfs_fault_and_reload(backend, dac):
    backend.inject_fault("dac0", "error")
    with pytest.raises(BackendFaultError):
        dac.read_attr("raw0")
    with pytest.raises(BackendUnavailableError):
        dac.read_attr("raw0")
    dac.reload()
    assert dac.read_attr("raw0") == 0


# --- factory ---------------------------------------------------------------

def test_bijection_sim_tree(backend):
    nodes = parse_device_tree(backend.device_tree_text(), origin="sim")
    eps = make_endpoints(nodes, backend)
    assert list(eps) == [n.label for n in nodes]
    assert isinstance(eps["regs0"], PlatformEndpoint)
    assert isinstance(eps["dac0"], SysfsEndpoint)


def test_empty_tree_empty_directory(backend):
    assert make_endpoints([], backend) == {}


def test_strict_backend_rejects_unprovisioned_window():
    backend = SimBackend(clock=VirtualClock(), strict=True)
    try:
        nodes = parse_device_tree(
            "node ghost compatible=x,y reg=0x100000,0x1000\n")
        with pytest.raises(BackendUnavailableError):
            make_endpoints(nodes, backend)
    finally:
        backend.close()


def test_lenient_backend_auto_provisions():
    backend = SimBackend(clock=VirtualClock())
    try:
        nodes = parse_device_tree(
            "node extra compatible=x,y reg=0x100000,0x1000\n")
        eps = make_endpoints(nodes, backend)
        assert eps["extra"].read(0, 32) == 0
    finally:
        backend.close()


def test_sysfs_auto_node_matches_by_label(backend):
    nodes = parse_device_tree("node dac0 compatible=x,y sysfs=auto")
    eps = make_endpoints(nodes, backend)
    assert isinstance(eps["dac0"], SysfsEndpoint)
    assert eps["dac0"].read_attr("raw0") == 0
