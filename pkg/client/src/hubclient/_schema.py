"""Protobuf message classes and method tables for the hub wire contract.

Built at import time from the bundled descriptor set (hub.desc), which is
generated from the same protocol definition the daemon serves; see
protos/generate.sh in the daemon repository. Field numbers and service
names are frozen by that contract.
"""

from __future__ import annotations

from pathlib import Path

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
ListPluginsResponse = _message("ListPluginsResponse")
ReloadPluginRequest = _message("ReloadPluginRequest")
ReloadPluginResponse = _message("ReloadPluginResponse")
GetHealthRequest = _message("GetHealthRequest")
GetHealthResponse = _message("GetHealthResponse")

VARIANT_BYTES = StreamRequest.Variant.BYTES
VARIANT_WORD32 = StreamRequest.Variant.WORD32

# (service, method) -> (request type, response type); streaming arity is
# handled by the client, which knows which two methods stream.
METHODS = {
    ("hubrpc.RegisterService", "ReadRegisters"):
        (RegisterRequest, RegisterResponse),
    ("hubrpc.RegisterService", "WriteRegisters"):
        (RegisterRequest, RegisterResponse),
    ("hubrpc.RegisterService", "WriteReadRegisters"):
        (RegisterRequest, RegisterResponse),
    ("hubrpc.AttrService", "ReadAttr"): (AttrRequest, AttrResponse),
    ("hubrpc.AttrService", "WriteAttr"): (AttrRequest, AttrResponse),
    ("hubrpc.AttrService", "WriteReadAttr"): (AttrRequest, AttrResponse),
    ("hubrpc.StreamService", "StreamRead"): (StreamRequest, StreamBlock),
    ("hubrpc.StreamService", "StreamWrite"): (StreamBlock, StreamSummary),
    ("hubrpc.AdminService", "ListPlugins"):
        (ListPluginsRequest, ListPluginsResponse),
    ("hubrpc.AdminService", "ReloadPlugin"):
        (ReloadPluginRequest, ReloadPluginResponse),
    ("hubrpc.HealthService", "GetHealth"):
        (GetHealthRequest, GetHealthResponse),
}
