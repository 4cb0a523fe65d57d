"""Runtime-loaded protobuf schema and service method tables.

Message classes are built from the checked-in serialized descriptor set
(hub.desc) instead of generated _pb2 modules, which keeps the package
independent of the protoc version used on the build host. The method
tables below drive both the server-side handler registration and the
client stubs; they must stay in sync with protos/hub.proto.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import grpc
from google.protobuf import descriptor_pb2, descriptor_pool, message_factory

_DESC_PATH = Path(__file__).with_name("hub.desc")

_pool = descriptor_pool.DescriptorPool()
for _file in descriptor_pb2.FileDescriptorSet.FromString(
        _DESC_PATH.read_bytes()).file:
    _pool.Add(_file)


def _message(name: str):
    return message_factory.GetMessageClass(
        _pool.FindMessageTypeByName(f"hubrpc.{name}"))


RegisterRequest = _message("RegisterRequest")
RegisterResponse = _message("RegisterResponse")
AttrRequest = _message("AttrRequest")
AttrResponse = _message("AttrResponse")
StreamRequest = _message("StreamRequest")
WordArray = _message("WordArray")
StreamBlock = _message("StreamBlock")
StreamSummary = _message("StreamSummary")
ListPluginsRequest = _message("ListPluginsRequest")
PluginInfo = _message("PluginInfo")
ListPluginsResponse = _message("ListPluginsResponse")
ReloadPluginRequest = _message("ReloadPluginRequest")
ReloadPluginResponse = _message("ReloadPluginResponse")
GetHealthRequest = _message("GetHealthRequest")
ComponentHealth = _message("ComponentHealth")
GetHealthResponse = _message("GetHealthResponse")

VARIANT_BYTES = StreamRequest.Variant.BYTES
VARIANT_WORD32 = StreamRequest.Variant.WORD32

UNARY_UNARY = "unary_unary"
UNARY_STREAM = "unary_stream"
STREAM_UNARY = "stream_unary"


@dataclass(frozen=True)
class MethodSpec:
    name: str
    request: type
    response: type
    arity: str = UNARY_UNARY


REGISTER_SERVICE = "hubrpc.RegisterService"
ATTR_SERVICE = "hubrpc.AttrService"
STREAM_SERVICE = "hubrpc.StreamService"
ADMIN_SERVICE = "hubrpc.AdminService"
HEALTH_SERVICE = "hubrpc.HealthService"

SERVICES: dict[str, tuple[MethodSpec, ...]] = {
    REGISTER_SERVICE: (
        MethodSpec("ReadRegisters", RegisterRequest, RegisterResponse),
        MethodSpec("WriteRegisters", RegisterRequest, RegisterResponse),
        MethodSpec("WriteReadRegisters", RegisterRequest, RegisterResponse),
    ),
    ATTR_SERVICE: (
        MethodSpec("ReadAttr", AttrRequest, AttrResponse),
        MethodSpec("WriteAttr", AttrRequest, AttrResponse),
        MethodSpec("WriteReadAttr", AttrRequest, AttrResponse),
    ),
    STREAM_SERVICE: (
        MethodSpec("StreamRead", StreamRequest, StreamBlock, UNARY_STREAM),
        MethodSpec("StreamWrite", StreamBlock, StreamSummary, STREAM_UNARY),
    ),
    ADMIN_SERVICE: (
        MethodSpec("ListPlugins", ListPluginsRequest, ListPluginsResponse),
        MethodSpec("ReloadPlugin", ReloadPluginRequest, ReloadPluginResponse),
    ),
    HEALTH_SERVICE: (
        MethodSpec("GetHealth", GetHealthRequest, GetHealthResponse),
    ),
}

_HANDLER_FACTORY = {
    UNARY_UNARY: grpc.unary_unary_rpc_method_handler,
    UNARY_STREAM: grpc.unary_stream_rpc_method_handler,
    STREAM_UNARY: grpc.stream_unary_rpc_method_handler,
}


def service_handler(service_name: str, impl: object) -> grpc.GenericRpcHandler:
    """Bind an implementation object's methods as a gRPC service handler.

    impl must provide one attribute per method in SERVICES[service_name]
    with the usual (request, context) / (request_iterator, context)
    signature.
    """
    handlers = {}
    for spec in SERVICES[service_name]:
        fn = getattr(impl, spec.name)
        handlers[spec.name] = _HANDLER_FACTORY[spec.arity](
            fn,
            request_deserializer=spec.request.FromString,
            response_serializer=lambda msg: msg.SerializeToString(),
        )
    return grpc.method_handlers_generic_handler(service_name, handlers)
