"""Simulated hardware backend.

Provides register files behind memory-window semantics, an I2C DAC-style
device exposed as a sysfs-like attribute tree, board sensors with a
checksummed boot image, configurable latency models, and fault injection.
All timing flows through an injected clock so the same backend runs in
realtime or on a virtual clock.
"""

from __future__ import annotations

import logging
import random
import shutil
import tempfile
import threading
import zlib
from array import array
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .clock import Clock, MonotonicClock, VirtualClock
from .errors import (
    BackendFaultError,
    BackendUnavailableError,
    NoSuchChannelError,
    OutOfRangeError,
    OverlapError,
    UnknownTargetError,
)

logger = logging.getLogger(__name__)

WORD_BYTES = 4
WORD_MASK = 0xFFFFFFFF

FAULT_NONE = "none"
FAULT_STUCK = "stuck"
FAULT_ERROR = "error"
_FAULT_KINDS = (FAULT_STUCK, FAULT_ERROR)


@dataclass(frozen=True)
class LatencyModel:
    """Per-call access cost: base + per-extra-word + jitter + rare outliers.

    A single backend call touching n words costs
    base + (n - 1) * per_word + N(0, jitter_std) and with probability
    outlier_prob an additional outlier_ns. Samples are clamped at zero.
    """

    base_read_ns: float = 0.0
    base_write_ns: float = 0.0
    per_word_ns: float = 0.0
    jitter_std_ns: float = 0.0
    outlier_prob: float = 0.0
    outlier_ns: float = 0.0
    rng_seed: int = 0

    def scrub_stochastic(self) -> "LatencyModel":
        """Copy with jitter and outliers removed; the mean becomes exact."""
        return replace(self, jitter_std_ns=0.0, outlier_prob=0.0, outlier_ns=0.0)

    def expected_ns(self, op: str, words: int = 1) -> float:
        """Deterministic cost of one call, ignoring jitter and outliers."""
        base = self.base_read_ns if op == "r" else self.base_write_ns
        return base + (max(1, words) - 1) * self.per_word_ns


class _LatencySampler:
    """Draws per-call delays for one device from its latency model."""

    def __init__(self, model: LatencyModel):
        self.model = model
        self._rng = random.Random(model.rng_seed)

    def sample_ns(self, op: str, words: int = 1) -> int:
        m = self.model
        ns = m.expected_ns(op, words)
        if m.jitter_std_ns > 0.0:
            ns += self._rng.gauss(0.0, m.jitter_std_ns)
        if m.outlier_prob > 0.0 and self._rng.random() < m.outlier_prob:
            ns += m.outlier_ns
        return max(0, round(ns))


class RegisterFile:
    """A block of 32-bit registers at a fixed physical base address.

    Storage is word-addressed. Every public method is one backend call
    and incurs one latency sample. Initial word i holds
    (init_pattern + i) mod 2^32 so fresh contents are predictable.
    """

    def __init__(
        self,
        label: str,
        base: int,
        size: int,
        init_pattern: int = 0,
        latency: LatencyModel | None = None,
        clock: Clock | None = None,
    ):
        if size <= 0 or size % WORD_BYTES:
            raise ValueError(f"region size must be a positive multiple of 4: {size}")
        if base % WORD_BYTES:
            raise ValueError(f"region base must be word aligned: {base:#x}")
        self.label = label
        self.base = base
        self.size = size
        self.n_words = size // WORD_BYTES
        self.init_pattern = init_pattern & WORD_MASK
        self._clock = clock or MonotonicClock()
        self._sampler = _LatencySampler(latency or LatencyModel())
        self._lock = threading.Lock()
        self._fault = FAULT_NONE
        self._words = self._fresh_words()

    def _fresh_words(self) -> array:
        return array("I", ((self.init_pattern + i) & WORD_MASK
                           for i in range(self.n_words)))

    def _check_range(self, index: int, count: int) -> None:
        if count < 1:
            raise OutOfRangeError(f"{self.label}: count must be >= 1, got {count}")
        if index < 0 or index + count > self.n_words:
            raise OutOfRangeError(
                f"{self.label}: words [{index}, {index + count}) outside "
                f"0..{self.n_words}")

    def _enter(self, op: str, words: int) -> None:
        if self._fault == FAULT_ERROR:
            raise BackendFaultError(f"{self.label}: backend access fault")
        self._clock.delay_ns(self._sampler.sample_ns(op, words))

    def read_words(self, index: int, count: int) -> list[int]:
        self._check_range(index, count)
        self._enter("r", count)
        with self._lock:
            return list(self._words[index:index + count])

    def write_words(self, index: int, values: Sequence[int]) -> None:
        self._check_range(index, len(values))
        for v in values:
            if not 0 <= v <= WORD_MASK:
                raise OutOfRangeError(f"{self.label}: word value out of range: {v:#x}")
        self._enter("w", len(values))
        if self._fault == FAULT_STUCK:
            return
        with self._lock:
            self._words[index:index + len(values)] = array("I", values)

    def write_masked(self, index: int, mask: int, value: int) -> None:
        """Read-modify-write of one word as a single backend call."""
        self._check_range(index, 1)
        if not 0 <= mask <= WORD_MASK or not 0 <= value <= WORD_MASK:
            raise OutOfRangeError(f"{self.label}: mask/value out of 32-bit range")
        self._enter("w", 1)
        if self._fault == FAULT_STUCK:
            return
        with self._lock:
            self._words[index] = (self._words[index] & ~mask | value & mask) & WORD_MASK

    def inject_fault(self, kind: str) -> None:
        if kind not in _FAULT_KINDS:
            raise ValueError(f"unknown fault kind: {kind!r}")
        logger.warning("injecting %s fault on %s", kind, self.label)
        self._fault = kind

    def clear_fault(self) -> None:
        self._fault = FAULT_NONE

    @property
    def fault(self) -> str:
        return self._fault

    @property
    def latency(self) -> LatencyModel:
        return self._sampler.model

    def set_latency(self, model: LatencyModel) -> None:
        self._sampler = _LatencySampler(model)

    def reset(self) -> None:
        """Restore initial contents and clear any injected fault."""
        with self._lock:
            self._words = self._fresh_words()
        self._fault = FAULT_NONE


class RegisterWindow:
    """A bounds-checked word window into a register file.

    Indices are word offsets relative to the window start. This is the
    whole surface the platform endpoint layer sees.
    """

    def __init__(self, region: RegisterFile, word_offset: int, n_words: int):
        self._region = region
        self._offset = word_offset
        self.n_words = n_words

    @property
    def label(self) -> str:
        return self._region.label

    def _translate(self, index: int, count: int) -> int:
        if count < 1 or index < 0 or index + count > self.n_words:
            raise OutOfRangeError(
                f"{self._region.label}: window words [{index}, {index + count}) "
                f"outside 0..{self.n_words}")
        return self._offset + index

    def read_words(self, index: int, count: int) -> list[int]:
        return self._region.read_words(self._translate(index, count), count)

    def write_words(self, index: int, values: Sequence[int]) -> None:
        self._region.write_words(self._translate(index, len(values)), values)

    def write_masked(self, index: int, mask: int, value: int) -> None:
        self._region.write_masked(self._translate(index, 1), mask, value)


class SimI2CDevice:
    """A DAC-style device behind a slow serial bus.

    State lives in plain text attribute files (raw0..raw7, decimal plus
    trailing newline) under root/<label>/, mimicking a sysfs directory.
    The device contributes a latency hook and legal value ranges; file
    I/O itself is done by the sysfs endpoint layer.
    """

    CHANNELS = 8
    RAW_RANGE = (0, 0xFFFF)

    def __init__(
        self,
        label: str,
        root: Path,
        latency: LatencyModel | None = None,
        clock: Clock | None = None,
        initial: int = 0,
    ):
        self.label = label
        self.dir = Path(root) / label
        self.dir.mkdir(parents=True, exist_ok=True)
        self._clock = clock or MonotonicClock()
        self._sampler = _LatencySampler(latency or LatencyModel())
        self._fault = False
        for name in self.attribute_names():
            (self.dir / name).write_text(f"{initial}\n")

    @classmethod
    def attribute_names(cls) -> list[str]:
        return [f"raw{i}" for i in range(cls.CHANNELS)]

    def ranges(self) -> dict[str, tuple[int, int]]:
        return {name: self.RAW_RANGE for name in self.attribute_names()}

    def delay(self, op: str) -> None:
        """Per-access bus cost; raises when an error fault is active."""
        if self._fault:
            raise BackendFaultError(f"{self.label}: bus access fault")
        self._clock.delay_ns(self._sampler.sample_ns(op, 1))

    def _channel_path(self, channel: int) -> Path:
        if not 0 <= channel < self.CHANNELS:
            raise NoSuchChannelError(
                f"{self.label}: channel {channel} outside 0..{self.CHANNELS - 1}")
        return self.dir / f"raw{channel}"

    def read16(self, channel: int) -> int:
        """Bus-level channel read; one latency sample."""
        path = self._channel_path(channel)
        self.delay("r")
        return int(path.read_text().strip())

    def write16(self, channel: int, value: int) -> None:
        """Bus-level channel write; one latency sample."""
        path = self._channel_path(channel)
        lo, hi = self.RAW_RANGE
        if not lo <= value <= hi:
            raise OutOfRangeError(
                f"{self.label}: value {value:#x} does not fit in 16 bits")
        self.delay("w")
        path.write_text(f"{value}\n")

    def inject_fault(self, kind: str) -> None:
        if kind != FAULT_ERROR:
            raise ValueError(f"sysfs device supports only {FAULT_ERROR!r} faults")
        logger.warning("injecting %s fault on %s", kind, self.label)
        self._fault = True

    def clear_fault(self) -> None:
        self._fault = False

    @property
    def latency(self) -> LatencyModel:
        return self._sampler.model

    def set_latency(self, model: LatencyModel) -> None:
        self._sampler = _LatencySampler(model)

    def reset(self) -> None:
        self._fault = False
        for name in self.attribute_names():
            (self.dir / name).write_text("0\n")


DEFAULT_VOLTAGES_MV = {"vdd_3v3": 3300, "vdd_1v8": 1800, "vdd_0v9": 900}


class SimSensors:
    """Board sensors plus a checksummed boot image.

    The boot image is generated from the seed and its CRC-32 recorded at
    construction; corrupt_boot_image flips bytes in place without
    touching the stored checksum, which is exactly what integrity
    monitoring is there to catch.
    """

    def __init__(
        self,
        temperature_mC: int = 45_000,
        temperature_noise_mC: int = 500,
        voltages_mV: dict[str, int] | None = None,
        boot_image_bytes: int = 4096,
        rng_seed: int = 0,
    ):
        self.base_temperature_mC = temperature_mC
        self.temperature_noise_mC = temperature_noise_mC
        self.voltages_mV = dict(voltages_mV or DEFAULT_VOLTAGES_MV)
        self._rng = random.Random(rng_seed)
        self._image = bytearray(self._rng.randbytes(boot_image_bytes))
        self._pristine = bytes(self._image)
        self._stored_crc32 = zlib.crc32(self._pristine) & WORD_MASK

    def read_temperature_mC(self) -> int:
        noise = self.temperature_noise_mC
        if noise <= 0:
            return self.base_temperature_mC
        return self.base_temperature_mC + self._rng.randint(-noise, noise)

    def read_voltages_mV(self) -> dict[str, int]:
        return dict(self.voltages_mV)

    def boot_image(self) -> bytes:
        return bytes(self._image)

    @property
    def stored_crc32(self) -> int:
        return self._stored_crc32

    def corrupt_boot_image(self, offset: int, value: int | None = None) -> None:
        """Overwrite one byte; defaults to inverting it so it must differ."""
        if not 0 <= offset < len(self._image):
            raise OutOfRangeError(f"boot image offset out of range: {offset}")
        self._image[offset] = (self._image[offset] ^ 0xFF) if value is None else value & 0xFF

    def restore_boot_image(self) -> None:
        self._image = bytearray(self._pristine)


DEFAULT_REGISTER_LATENCY = LatencyModel(
    base_read_ns=326.0,
    base_write_ns=243.0,
    per_word_ns=250.0,
    jitter_std_ns=8.0,
    outlier_prob=0.002,
    outlier_ns=10_000.0,
)

DEFAULT_DAC_LATENCY = LatencyModel(
    base_read_ns=257_000.0,
    base_write_ns=161_000.0,
    per_word_ns=0.0,
    jitter_std_ns=2_000.0,
    outlier_prob=0.0,
    outlier_ns=0.0,
)

_DEFAULT_REGIONS = {
    "regs0": {"base": 0x1000, "size": 0x1000},
    "regs1": {"base": 0x2000, "size": 0x1000},
}

DAC_LABEL = "dac0"


def _derive_seed(master: int, label: str) -> int:
    return master ^ zlib.crc32(label.encode())


class SimBackend:
    """The assembled simulated platform.

    Owns the register regions, the DAC attribute tree, the sensors and
    the clock. Hands out bounds-checked register windows to endpoints
    and a device-tree description of everything it provisioned.
    """

    def __init__(
        self,
        clock: Clock | None = None,
        rng_seed: int = 0,
        strict: bool = False,
        sysfs_root: str | Path | None = None,
        region_specs: dict[str, dict] | None = None,
        dac_latency: LatencyModel | None = None,
        sensors: SimSensors | None = None,
    ):
        self.clock = clock or MonotonicClock()
        self.rng_seed = rng_seed
        self.strict = strict
        self._owns_sysfs_root = sysfs_root is None
        self.sysfs_root = Path(sysfs_root) if sysfs_root else Path(
            tempfile.mkdtemp(prefix="hubd-sim-"))
        self.sysfs_root.mkdir(parents=True, exist_ok=True)

        specs = region_specs if region_specs is not None else _DEFAULT_REGIONS
        self.regions: dict[str, RegisterFile] = {}
        for label, spec in specs.items():
            base = spec.get("base")
            if base is None:
                base = 0x1000 + 0x1000 * len(self.regions)
            latency = spec.get("latency")
            model = latency if isinstance(latency, LatencyModel) else LatencyModel(
                **{**vars(DEFAULT_REGISTER_LATENCY),
                   "rng_seed": _derive_seed(rng_seed, label),
                   **(latency or {})})
            region = RegisterFile(
                label=label,
                base=base,
                size=spec.get("size", 0x1000),
                init_pattern=spec.get("init_pattern", 0),
                latency=model,
                clock=self.clock,
            )
            self._check_overlap(region)
            self.regions[label] = region

        dac_model = dac_latency or replace(
            DEFAULT_DAC_LATENCY, rng_seed=_derive_seed(rng_seed, DAC_LABEL))
        self.dac = SimI2CDevice(DAC_LABEL, self.sysfs_root,
                                latency=dac_model, clock=self.clock)
        self.sensors = sensors or SimSensors(rng_seed=_derive_seed(rng_seed, "sensors"))

    @classmethod
    def from_config(cls, backend_cfg: dict, clock: Clock | None = None) -> "SimBackend":
        """Build a backend from the (already validated) config subtree."""
        cfg = dict(backend_cfg or {})
        if clock is None:
            clock = VirtualClock() if cfg.get("mode") == "virtual" else MonotonicClock()
        sensors_cfg = cfg.get("sensors") or {}
        seed = cfg.get("rng_seed", 0)
        sensors = SimSensors(
            temperature_mC=sensors_cfg.get("temperature_mC", 45_000),
            temperature_noise_mC=sensors_cfg.get("temperature_noise_mC", 500),
            voltages_mV=sensors_cfg.get("voltages_mV"),
            boot_image_bytes=sensors_cfg.get("boot_image_bytes", 4096),
            rng_seed=_derive_seed(seed, "sensors"),
        )
        dac_cfg = cfg.get("dac") or {}
        dac_latency = LatencyModel(
            **{**vars(DEFAULT_DAC_LATENCY),
               "rng_seed": _derive_seed(seed, DAC_LABEL),
               **(dac_cfg.get("latency") or {})})
        return cls(
            clock=clock,
            rng_seed=seed,
            strict=cfg.get("strict", False),
            sysfs_root=cfg.get("sysfs_root"),
            region_specs=cfg.get("regions"),
            dac_latency=dac_latency,
            sensors=sensors,
        )

    def _check_overlap(self, new: RegisterFile) -> None:
        for other in self.regions.values():
            if new.base < other.base + other.size and other.base < new.base + new.size:
                raise OverlapError(
                    f"region {new.label} [{new.base:#x}, {new.base + new.size:#x}) "
                    f"overlaps {other.label} [{other.base:#x}, "
                    f"{other.base + other.size:#x})")

    def device_tree_text(self) -> str:
        """Device-tree fixture text describing the provisioned hardware."""
        lines = ["# simulated platform"]
        for region in self.regions.values():
            lines.append(
                f"node {region.label} compatible=simdev,regfile "
                f"reg={region.base:#x},{region.size:#x}")
        lines.append(
            f"node {self.dac.label} compatible=simdev,i2c-dac "
            f"sysfs={self.dac.dir.relative_to(self.sysfs_root)}")
        return "\n".join(lines) + "\n"

    def map_window(self, base: int, size: int) -> RegisterWindow:
        """Resolve a physical range to a word window over one region."""
        if size <= 0 or size % WORD_BYTES or base % WORD_BYTES:
            raise OutOfRangeError(
                f"window [{base:#x}, +{size:#x}) must be word aligned and non-empty")
        for region in self.regions.values():
            if region.base <= base and base + size <= region.base + region.size:
                return RegisterWindow(region, (base - region.base) // WORD_BYTES,
                                      size // WORD_BYTES)
            if base < region.base + region.size and region.base < base + size:
                raise OverlapError(
                    f"window [{base:#x}, +{size:#x}) partially overlaps "
                    f"region {region.label}")
        if self.strict:
            raise BackendUnavailableError(
                f"no configured region covers window [{base:#x}, +{size:#x})")
        label = f"auto_{base:#x}"
        logger.info("auto-provisioning region %s for window [%#x, +%#x)",
                    label, base, size)
        region = RegisterFile(
            label=label, base=base, size=size,
            latency=replace(DEFAULT_REGISTER_LATENCY,
                            rng_seed=_derive_seed(self.rng_seed, label)),
            clock=self.clock)
        self.regions[label] = region
        return RegisterWindow(region, 0, region.n_words)

    def region_for_base(self, base: int) -> RegisterFile | None:
        for region in self.regions.values():
            if region.base == base:
                return region
        return None

    # sysfs device plumbing, keyed by node label

    def attr_dir(self, label: str) -> Path:
        if label != self.dac.label:
            raise UnknownTargetError(f"no sysfs device labelled {label!r}")
        return self.dac.dir

    def attr_delay(self, label: str, op: str) -> None:
        if label == self.dac.label:
            self.dac.delay(op)

    def attr_ranges(self, label: str) -> dict[str, tuple[int, int]]:
        if label != self.dac.label:
            raise UnknownTargetError(f"no sysfs device labelled {label!r}")
        return self.dac.ranges()

    # fault and lifecycle control

    def _device(self, label: str):
        if label in self.regions:
            return self.regions[label]
        if label == self.dac.label:
            return self.dac
        raise UnknownTargetError(f"no device labelled {label!r}")

    def inject_fault(self, label: str, kind: str) -> None:
        self._device(label).inject_fault(kind)

    def clear_fault(self, label: str) -> None:
        self._device(label).clear_fault()

    def reset_device(self, label: str) -> None:
        self._device(label).reset()

    def scrub_stochastic(self) -> None:
        """Strip jitter and outliers everywhere; delays become closed-form."""
        for region in self.regions.values():
            region.set_latency(region.latency.scrub_stochastic())
        self.dac.set_latency(self.dac.latency.scrub_stochastic())

    def close(self) -> None:
        if self._owns_sysfs_root:
            shutil.rmtree(self.sysfs_root, ignore_errors=True)
