"""
Fitted-operation container (.pfop):

    magic      4 bytes  b"PFOP"
    version    1 byte
    id length  2 bytes, big endian
    op id      UTF-8
    payload    canonical JSON of the FittedOperation record, arrays as base64

No pickling: every state value must be a number, string, bool, None, list, dict or
numpy array.
"""

import base64
import json
import struct
from typing import Any, Dict

import numpy as np

from errors import SchemaError, UnserializableStateError
from settings import CONTAINER_MAGIC, CONTAINER_VERSION

ARRAY_KEY = "__ndarray__"


def encode_value(value: Any, node_id: Any = None) -> Any:
    if isinstance(value, np.ndarray):
        if value.dtype == object:
            raise UnserializableStateError(node_id, "object arrays cannot be archived")
        contiguous = np.ascontiguousarray(value)
        return {
            ARRAY_KEY: base64.b64encode(contiguous.tobytes()).decode("ascii"),
            "dtype": contiguous.dtype.str,
            "shape": list(contiguous.shape),
        }
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        encoded = {}
        for key, item in value.items():
            if not isinstance(key, str):
                raise UnserializableStateError(node_id, f"state key {key!r} is not a string")
            encoded[key] = encode_value(item, node_id)
        return encoded
    if isinstance(value, (list, tuple)):
        return [encode_value(item, node_id) for item in value]
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    raise UnserializableStateError(node_id, f"cannot archive a {type(value).__name__}")


def decode_value(value: Any) -> Any:
    if isinstance(value, dict):
        if ARRAY_KEY in value:
            raw = base64.b64decode(value[ARRAY_KEY])
            return np.frombuffer(raw, dtype=np.dtype(value["dtype"])).reshape(value["shape"]).copy()
        return {key: decode_value(item) for key, item in value.items()}
    if isinstance(value, list):
        return [decode_value(item) for item in value]
    return value


def encode_container(record: Dict[str, Any], node_id: Any = None) -> bytes:
    operation_id = record["operation_id"].encode("utf-8")
    payload = json.dumps(encode_value(record, node_id), sort_keys=True, separators=(",", ":"))
    header = CONTAINER_MAGIC + struct.pack(">BH", CONTAINER_VERSION, len(operation_id))
    return header + operation_id + payload.encode("utf-8")


def decode_container(blob: bytes, location: str = "container") -> Dict[str, Any]:
    magic_size = len(CONTAINER_MAGIC)
    if blob[:magic_size] != CONTAINER_MAGIC:
        raise SchemaError(location, "not a fitted-operation container")
    try:
        version, id_length = struct.unpack(">BH", blob[magic_size:magic_size + 3])
    except struct.error:
        raise SchemaError(location, "truncated header") from None
    if version != CONTAINER_VERSION:
        raise SchemaError(location, f"unsupported container version {version}")
    start = magic_size + 3
    try:
        operation_id = blob[start:start + id_length].decode("utf-8")
        record = decode_value(json.loads(blob[start + id_length:].decode("utf-8")))
    except ValueError as exc:
        raise SchemaError(location, f"header or payload is not valid UTF-8 JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise SchemaError(location, "payload is not a JSON object")
    if record.get("operation_id") != operation_id:
        raise SchemaError(location, f"header names {operation_id}, payload {record.get('operation_id')}")
    return record


def write_container(path: str, record: Dict[str, Any], node_id: Any = None):
    blob = encode_container(record, node_id)
    with open(path, "wb") as handle:
        handle.write(blob)


def read_container(path: str) -> Dict[str, Any]:
    with open(path, "rb") as handle:
        return decode_container(handle.read(), path)
