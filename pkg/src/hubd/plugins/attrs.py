"""Attribute access plugin: serves AttrService over sysfs endpoints."""

from __future__ import annotations

from ..endpoints import SysfsEndpoint
from ..errors import UnknownTargetError
from ..rpc import schema
from .api import PLUGIN_API_VERSION, HubContext, Plugin, RpcService, rpc_method

__all__ = ["PLUGIN_API_VERSION", "construct", "destruct"]


class _AttrServicer:
    def __init__(self, plugin: "AttrPlugin"):
        self._plugin = plugin

    def _endpoint(self, name: str) -> SysfsEndpoint:
        ep = self._plugin.ctx.endpoints.get(name)
        if ep is None:
            raise UnknownTargetError(f"no such endpoint: {name!r}")
        if not isinstance(ep, SysfsEndpoint):
            raise UnknownTargetError(f"endpoint {name!r} has no attributes")
        return ep

    @rpc_method
    def ReadAttr(self, request, context):
        ep = self._endpoint(request.endpoint)
        return schema.AttrResponse(value=ep.read_attr(request.attribute))

    @rpc_method
    def WriteAttr(self, request, context):
        ep = self._endpoint(request.endpoint)
        ep.write_attr(request.attribute, request.value)
        return schema.AttrResponse(value=request.value)

    @rpc_method
    def WriteReadAttr(self, request, context):
        ep = self._endpoint(request.endpoint)
        value = ep.write_read_attr(request.attribute, request.value)
        return schema.AttrResponse(value=value)


class AttrPlugin(Plugin):
    def services(self) -> list[RpcService]:
        return [RpcService(
            schema.ATTR_SERVICE,
            schema.service_handler(schema.ATTR_SERVICE, _AttrServicer(self)))]

    def reload(self) -> int:
        count = 0
        for ep in self.ctx.endpoints.values():
            if isinstance(ep, SysfsEndpoint):
                ep.reload()
                count += 1
        return count


def construct(config, logger, ctx: HubContext) -> AttrPlugin:
    return AttrPlugin(config, logger, ctx)


def destruct(plugin: AttrPlugin) -> None:
    plugin.stop()
