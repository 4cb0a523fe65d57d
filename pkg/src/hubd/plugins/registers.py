"""Register access plugin: serves RegisterService over platform endpoints."""

from __future__ import annotations

from ..endpoints import PlatformEndpoint
from ..errors import UnknownTargetError
from ..rpc import schema
from .api import PLUGIN_API_VERSION, HubContext, Plugin, RpcService, rpc_method

__all__ = ["PLUGIN_API_VERSION", "construct", "destruct"]


class _RegisterServicer:
    def __init__(self, plugin: "RegisterPlugin"):
        self._plugin = plugin

    def _endpoint(self, name: str) -> PlatformEndpoint:
        ep = self._plugin.ctx.endpoints.get(name)
        if ep is None:
            raise UnknownTargetError(f"no such endpoint: {name!r}")
        if not isinstance(ep, PlatformEndpoint):
            raise UnknownTargetError(
                f"endpoint {name!r} has no register window")
        return ep

    @staticmethod
    def _shape(request) -> tuple[int, int, int]:
        address = request.address
        width = request.width or 32
        count = request.count or 1
        return address, width, count

    @rpc_method
    def ReadRegisters(self, request, context):
        ep = self._endpoint(request.endpoint)
        address, width, count = self._shape(request)
        values = ep.read_many(address, width, count)
        return schema.RegisterResponse(values=values)

    @rpc_method
    def WriteRegisters(self, request, context):
        ep = self._endpoint(request.endpoint)
        address, width, count = self._shape(request)
        if len(request.values) != count:
            raise ValueError(
                f"write carries {len(request.values)} values for count {count}")
        ep.write_many(address, width, list(request.values))
        return schema.RegisterResponse()

    @rpc_method
    def WriteReadRegisters(self, request, context):
        ep = self._endpoint(request.endpoint)
        address, width, count = self._shape(request)
        if len(request.values) != count:
            raise ValueError(
                f"write carries {len(request.values)} values for count {count}")
        # one RPC, one lock hold: the readback can't interleave with
        # another writer to the same endpoint
        with ep.lock:
            ep.write_many(address, width, list(request.values))
            values = ep.read_many(address, width, count)
        return schema.RegisterResponse(values=values)


class RegisterPlugin(Plugin):
    def services(self) -> list[RpcService]:
        return [RpcService(
            schema.REGISTER_SERVICE,
            schema.service_handler(schema.REGISTER_SERVICE,
                                   _RegisterServicer(self)))]

    def reload(self) -> int:
        count = 0
        for ep in self.ctx.endpoints.values():
            if isinstance(ep, PlatformEndpoint):
                ep.reload()
                count += 1
        return count


def construct(config, logger, ctx: HubContext) -> RegisterPlugin:
    return RegisterPlugin(config, logger, ctx)


def destruct(plugin: RegisterPlugin) -> None:
    plugin.stop()
