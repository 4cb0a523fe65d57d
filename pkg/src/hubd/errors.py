"""Exception hierarchy shared across the daemon."""

from __future__ import annotations


class HubError(Exception):
    """Base class for all daemon errors."""


# --- configuration ---------------------------------------------------------

class ConfigError(HubError):
    """Configuration file or workload specification is unusable."""


class ParseError(ConfigError):
    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location
        self.message = message


class SchemaError(ConfigError):
    """Config violates the published schema at a specific key path."""

    def __init__(self, key_path: str, message: str):
        super().__init__(f"{key_path}: {message}")
        self.key_path = key_path
        self.message = message


# --- plugin lifecycle ------------------------------------------------------

class PluginError(HubError):
    pass


class PluginNotFoundError(PluginError):
    def __init__(self, name: str, searched: list[str]):
        super().__init__(f"plugin {name!r} not found; searched: {', '.join(searched)}")
        self.name = name
        self.searched = searched


class AbiMismatchError(PluginError):
    """Plugin exposes a different factory contract version than the hub."""


class ConstructFailedError(PluginError):
    """Plugin constructor raised; carries the plugin's error message."""


class UnknownPluginError(PluginError):
    pass


# --- server assembly -------------------------------------------------------

class BindError(HubError):
    def __init__(self, address: str):
        super().__init__(f"cannot bind server to {address}")
        self.address = address


class DuplicateServiceNameError(HubError):
    def __init__(self, service: str, plugin: str):
        super().__init__(f"service {service!r} already registered (plugin {plugin!r})")
        self.service = service
        self.plugin = plugin


# --- device tree and endpoints ---------------------------------------------

class OverlapError(HubError):
    """Two platform nodes claim intersecting register address ranges."""


class AmbiguousMatchError(HubError):
    """More than one sysfs directory matches a device-tree node label."""


class BackendUnavailableError(HubError):
    """The hardware backend has no resource for the requested node."""


class BackendFaultError(HubError):
    """An injected or real fault makes the backing resource error out."""


class OutOfRangeError(HubError):
    pass


class MisalignedError(HubError):
    pass


class ValueTooWideError(HubError):
    pass


class NoSuchAttributeError(HubError):
    pass


class DecodeError(HubError):
    """Attribute content does not decode as (or encode to) a valid value."""


class NoSuchChannelError(HubError):
    pass


class UnknownTargetError(HubError):
    pass


# --- reliability -----------------------------------------------------------

class UnknownComponentError(HubError):
    pass


class IllegalTransitionError(HubError):
    def __init__(self, component: str, current: str, requested: str):
        super().__init__(
            f"{component}: illegal health transition {current} -> {requested}")
        self.component = component
        self.current = current
        self.requested = requested


# --- benchmarking ----------------------------------------------------------

class UnreachableError(HubError):
    """Benchmark target did not answer before any record was taken."""
