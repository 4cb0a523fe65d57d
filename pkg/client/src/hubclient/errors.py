"""Typed exceptions raised by the client SDK."""

from __future__ import annotations

import grpc


class HubClientError(Exception):
    """Base class for all SDK errors."""


class MalformedTargetError(HubClientError):
    """The target string is not host:port."""


class DeadlineError(HubClientError):
    """The call did not complete within its deadline."""


class UnavailableError(HubClientError):
    """The daemon (or the addressed hardware behind it) is unavailable."""


class InvalidArgumentError(HubClientError):
    """The daemon rejected the request arguments."""


class NotFoundError(HubClientError):
    """No such plugin or health component."""


class FailedPreconditionError(HubClientError):
    """The daemon refused the call in its current state."""


class RpcFailure(HubClientError):
    """Any other RPC failure; carries the grpc status code."""

    def __init__(self, code: grpc.StatusCode, details: str):
        super().__init__(f"{code.name}: {details}")
        self.code = code


class StreamIntegrityError(HubClientError):
    """Streamed payload disagreed with the expected generator output."""


_CODE_MAP = {
    grpc.StatusCode.DEADLINE_EXCEEDED: DeadlineError,
    grpc.StatusCode.UNAVAILABLE: UnavailableError,
    grpc.StatusCode.INVALID_ARGUMENT: InvalidArgumentError,
    grpc.StatusCode.NOT_FOUND: NotFoundError,
    grpc.StatusCode.FAILED_PRECONDITION: FailedPreconditionError,
}


def from_rpc_error(exc: grpc.RpcError) -> HubClientError:
    """Translate a grpc.RpcError into the SDK's typed exception."""
    code = exc.code()
    details = exc.details() or ""
    cls = _CODE_MAP.get(code)
    if cls is not None:
        return cls(details or code.name)
    return RpcFailure(code, details)
