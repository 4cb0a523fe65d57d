"""Client SDK for the hub control daemon."""

from .client import (
    ComponentStatus,
    HubClient,
    PluginStatus,
    StreamResult,
    connect,
    payload_stream,
)
from .errors import (
    DeadlineError,
    FailedPreconditionError,
    HubClientError,
    InvalidArgumentError,
    MalformedTargetError,
    NotFoundError,
    RpcFailure,
    StreamIntegrityError,
    UnavailableError,
)

__all__ = [
    "ComponentStatus",
    "DeadlineError",
    "FailedPreconditionError",
    "HubClient",
    "HubClientError",
    "InvalidArgumentError",
    "MalformedTargetError",
    "NotFoundError",
    "PluginStatus",
    "RpcFailure",
    "StreamIntegrityError",
    "StreamResult",
    "UnavailableError",
    "connect",
    "payload_stream",
]

__version__ = "0.1.0"
