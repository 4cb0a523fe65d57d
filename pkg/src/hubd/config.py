"""Daemon configuration: JSON loading and schema validation.

The published schema:

    {
      "server":      {"listen": "host:port", "compression": bool},
      "device_tree": {"source": "sim" | "<path>"},
      "watchdog":    {"enabled": bool, "timeout_ms": int},
      "backend":     { ...simulated-hardware subtree, see hubd.sim... },
      "plugins":     [{"name": str, "library": str, "config": {...}}]
    }

Every section is optional; unknown keys are rejected with a diagnostic
naming the offending key path. Plugin `config` subtrees are opaque.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, SchemaError

_TOP_KEYS = {"server", "device_tree", "watchdog", "backend", "plugins"}
_SERVER_KEYS = {"listen", "compression"}
_DEVICE_TREE_KEYS = {"source"}
_WATCHDOG_KEYS = {"enabled", "timeout_ms"}
_PLUGIN_KEYS = {"name", "library", "config"}
_BACKEND_KEYS = {
    "mode", "rng_seed", "strict", "sysfs_root",
    "regions", "dac", "sensors",
}
_REGION_KEYS = {"base", "size", "init_pattern", "latency"}
_DAC_KEYS = {"latency"}
_SENSOR_KEYS = {
    "temperature_mC", "temperature_noise_mC", "voltages_mV",
    "boot_image_bytes",
}
_LATENCY_KEYS = {
    "base_read_ns", "base_write_ns", "per_word_ns",
    "jitter_std_ns", "outlier_prob", "outlier_ns", "rng_seed",
}


@dataclass(frozen=True)
class PluginRequest:
    name: str
    library: str
    config: dict = field(default_factory=dict)


@dataclass(frozen=True)
class WatchdogConfig:
    enabled: bool = False
    timeout_ms: int = 5000


@dataclass(frozen=True)
class HubConfig:
    server_listen: str = "127.0.0.1:50051"
    compression_enabled: bool = False
    device_tree_source: str = "sim"
    watchdog: WatchdogConfig = field(default_factory=WatchdogConfig)
    backend: dict = field(default_factory=dict)
    plugins: tuple[PluginRequest, ...] = ()


def split_listen(listen: str) -> tuple[str, int]:
    """Split and validate a host:port string ([v6]:port supported)."""
    host, sep, port_s = listen.rpartition(":")
    if not sep or not host:
        raise SchemaError("server.listen", f"not a host:port address: {listen!r}")
    if host.startswith("[") and host.endswith("]"):
        host = host[1:-1]
    try:
        port = int(port_s)
    except ValueError:
        raise SchemaError("server.listen", f"port is not an integer: {port_s!r}") from None
    if not 0 <= port <= 65535:
        raise SchemaError("server.listen", f"port out of range: {port}")
    return host, port


def _require(value, types, path: str, typename: str):
    if not isinstance(value, types) or isinstance(value, bool) and bool not in _as_tuple(types):
        raise SchemaError(path, f"expected {typename}")
    return value


def _as_tuple(types):
    return types if isinstance(types, tuple) else (types,)


def _reject_unknown(obj: dict, allowed: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}" if path else key, "unknown key")


def _check_object(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(path, "expected object")
    return value


def _validate_latency(obj: dict, path: str) -> None:
    _reject_unknown(obj, _LATENCY_KEYS, path)
    for key, val in obj.items():
        if key == "outlier_prob":
            _require(val, (int, float), f"{path}.{key}", "number")
            if not 0.0 <= float(val) <= 1.0:
                raise SchemaError(f"{path}.{key}", "must be within [0, 1]")
        elif key == "rng_seed":
            _require(val, int, f"{path}.{key}", "integer")
        else:
            _require(val, (int, float), f"{path}.{key}", "number")
            if float(val) < 0:
                raise SchemaError(f"{path}.{key}", "must be >= 0")


def _validate_backend(obj: dict) -> None:
    _reject_unknown(obj, _BACKEND_KEYS, "backend")
    if "mode" in obj:
        if obj["mode"] not in ("realtime", "virtual"):
            raise SchemaError("backend.mode", "must be 'realtime' or 'virtual'")
    if "rng_seed" in obj:
        _require(obj["rng_seed"], int, "backend.rng_seed", "integer")
    if "strict" in obj:
        _require(obj["strict"], bool, "backend.strict", "boolean")
    if "sysfs_root" in obj:
        _require(obj["sysfs_root"], str, "backend.sysfs_root", "string")
    for label, region in _check_object(obj.get("regions", {}), "backend.regions").items():
        rpath = f"backend.regions.{label}"
        _check_object(region, rpath)
        _reject_unknown(region, _REGION_KEYS, rpath)
        for key in ("base", "size", "init_pattern"):
            if key in region:
                _require(region[key], int, f"{rpath}.{key}", "integer")
        if "latency" in region:
            _validate_latency(_check_object(region["latency"], f"{rpath}.latency"),
                              f"{rpath}.latency")
    if "dac" in obj:
        dac = _check_object(obj["dac"], "backend.dac")
        _reject_unknown(dac, _DAC_KEYS, "backend.dac")
        if "latency" in dac:
            _validate_latency(_check_object(dac["latency"], "backend.dac.latency"),
                              "backend.dac.latency")
    if "sensors" in obj:
        sensors = _check_object(obj["sensors"], "backend.sensors")
        _reject_unknown(sensors, _SENSOR_KEYS, "backend.sensors")
        for key in ("temperature_mC", "temperature_noise_mC", "boot_image_bytes"):
            if key in sensors:
                _require(sensors[key], int, f"backend.sensors.{key}", "integer")
        for name, mv in _check_object(sensors.get("voltages_mV", {}),
                                      "backend.sensors.voltages_mV").items():
            _require(mv, int, f"backend.sensors.voltages_mV.{name}", "integer")


def validate_config(raw: dict) -> HubConfig:
    """Validate a parsed JSON document and build the typed config."""
    _check_object(raw, "<root>")
    _reject_unknown(raw, _TOP_KEYS, "")

    server = _check_object(raw.get("server", {}), "server")
    _reject_unknown(server, _SERVER_KEYS, "server")
    listen = _require(server.get("listen", "127.0.0.1:50051"), str,
                      "server.listen", "string")
    split_listen(listen)
    compression = _require(server.get("compression", False), bool,
                           "server.compression", "boolean")

    device_tree = _check_object(raw.get("device_tree", {}), "device_tree")
    _reject_unknown(device_tree, _DEVICE_TREE_KEYS, "device_tree")
    source = _require(device_tree.get("source", "sim"), str,
                      "device_tree.source", "string")

    wd_raw = _check_object(raw.get("watchdog", {}), "watchdog")
    _reject_unknown(wd_raw, _WATCHDOG_KEYS, "watchdog")
    wd_enabled = _require(wd_raw.get("enabled", False), bool,
                          "watchdog.enabled", "boolean")
    wd_timeout = _require(wd_raw.get("timeout_ms", 5000), int,
                          "watchdog.timeout_ms", "integer")
    if wd_timeout <= 0:
        raise SchemaError("watchdog.timeout_ms", "must be > 0")

    backend = _check_object(raw.get("backend", {}), "backend")
    _validate_backend(backend)

    plugins_raw = raw.get("plugins", [])
    if not isinstance(plugins_raw, list):
        raise SchemaError("plugins", "expected array")
    plugins: list[PluginRequest] = []
    seen: set[str] = set()
    for i, entry in enumerate(plugins_raw):
        path = f"plugins[{i}]"
        _check_object(entry, path)
        _reject_unknown(entry, _PLUGIN_KEYS, path)
        name = _require(entry.get("name", ""), str, f"{path}.name", "string")
        if not name:
            raise SchemaError(f"{path}.name", "must be non-empty")
        if name in seen:
            raise SchemaError(f"{path}.name", f"duplicate plugin name {name!r}")
        seen.add(name)
        library = _require(entry.get("library", ""), str, f"{path}.library", "string")
        if not library:
            raise SchemaError(f"{path}.library", "must be non-empty")
        cfg = _check_object(entry.get("config", {}), f"{path}.config")
        plugins.append(PluginRequest(name=name, library=library, config=cfg))

    return HubConfig(
        server_listen=listen,
        compression_enabled=compression,
        device_tree_source=source,
        watchdog=WatchdogConfig(enabled=wd_enabled, timeout_ms=wd_timeout),
        backend=backend,
        plugins=tuple(plugins),
    )


def load_config(path: str | Path) -> HubConfig:
    """Read, parse and validate a daemon config file."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}", exc.msg) from None
    config = validate_config(raw)
    source = config.device_tree_source
    if source != "sim" and not Path(source).is_absolute():
        # relative device-tree paths are anchored at the config file
        resolved = str((path.parent / source).resolve())
        config = HubConfig(
            server_listen=config.server_listen,
            compression_enabled=config.compression_enabled,
            device_tree_source=resolved,
            watchdog=config.watchdog,
            backend=config.backend,
            plugins=config.plugins,
        )
    return config
