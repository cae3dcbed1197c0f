"""Minimal ONNX protobuf reader/writer.

Decodes the ModelProto subset the analyzer consumes — graph nodes with
attributes, initializer names/dims, and graph input/output value infos —
straight from the protobuf wire format, so no onnx/protobuf dependency is
needed. The writer covers the same subset and exists for building models in
tests and fixture generation.

Field numbers follow the public ONNX schema (onnx.proto3).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field


class MalformedFile(Exception):
    """The byte buffer does not decode as an ONNX model."""


# ---------------------------------------------------------------------------
# decoded model subset


@dataclass
class Attribute:
    name: str
    i: int | None = None
    f: float | None = None
    s: bytes | None = None
    ints: tuple[int, ...] = ()
    floats: tuple[float, ...] = ()
    has_graph: bool = False


@dataclass
class Node:
    op_type: str
    name: str = ""
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    attributes: dict[str, Attribute] = field(default_factory=dict)

    def attr_ints(self, name: str) -> tuple[int, ...] | None:
        a = self.attributes.get(name)
        if a is None:
            return None
        return a.ints if a.ints else ((a.i,) if a.i is not None else None)

    def attr_int(self, name: str, default: int | None = None) -> int | None:
        a = self.attributes.get(name)
        return a.i if a is not None and a.i is not None else default


@dataclass
class TensorInfo:
    name: str
    dims: tuple[int, ...] = ()


@dataclass
class ValueInfo:
    name: str
    shape: tuple[int, ...] = ()


@dataclass
class Graph:
    nodes: list[Node] = field(default_factory=list)
    name: str = ""
    initializers: dict[str, TensorInfo] = field(default_factory=dict)
    inputs: list[ValueInfo] = field(default_factory=list)
    outputs: list[ValueInfo] = field(default_factory=list)


@dataclass
class Model:
    graph: Graph
    ir_version: int = 0
    opset: int = 0


# ---------------------------------------------------------------------------
# wire-format primitives

_VARINT = 0
_I64 = 1
_LEN = 2
_I32 = 5


def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise MalformedFile("truncated varint")
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise MalformedFile("varint too long")


def _fields(buf: bytes):
    """Yield (field_number, wire_type, value) triples of one message."""
    pos = 0
    while pos < len(buf):
        key, pos = _read_varint(buf, pos)
        number, wire = key >> 3, key & 0x7
        if wire == _VARINT:
            value, pos = _read_varint(buf, pos)
        elif wire == _I64:
            if pos + 8 > len(buf):
                raise MalformedFile("truncated fixed64")
            value = buf[pos:pos + 8]
            pos += 8
        elif wire == _LEN:
            length, pos = _read_varint(buf, pos)
            if pos + length > len(buf):
                raise MalformedFile("truncated length-delimited field")
            value = buf[pos:pos + length]
            pos += length
        elif wire == _I32:
            if pos + 4 > len(buf):
                raise MalformedFile("truncated fixed32")
            value = buf[pos:pos + 4]
            pos += 4
        else:
            raise MalformedFile(f"unsupported wire type {wire}")
        yield number, wire, value


def _signed(value: int) -> int:
    # int64 values arrive as unsigned varints.
    return value - (1 << 64) if value >= (1 << 63) else value


def _utf8(value: bytes) -> str:
    try:
        return value.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedFile("non-UTF8 string field") from exc


def write_varint(value: int) -> bytes:
    out = bytearray()
    while True:
        bits = value & 0x7F
        value >>= 7
        if value:
            out.append(bits | 0x80)
        else:
            out.append(bits)
            return bytes(out)


def _tag(number: int, wire: int) -> bytes:
    return write_varint((number << 3) | wire)


def field_varint(number: int, value: int) -> bytes:
    if value < 0:
        value += 1 << 64
    return _tag(number, _VARINT) + write_varint(value)


def field_bytes(number: int, value: bytes) -> bytes:
    return _tag(number, _LEN) + write_varint(len(value)) + value


def field_string(number: int, value: str) -> bytes:
    return field_bytes(number, value.encode("utf-8"))


def field_float(number: int, value: float) -> bytes:
    return _tag(number, _I32) + struct.pack("<f", value)


# ---------------------------------------------------------------------------
# decoding


def _parse_attribute(buf: bytes) -> Attribute:
    attr = Attribute(name="")
    ints: list[int] = []
    floats: list[float] = []
    for number, wire, value in _fields(buf):
        if number == 1 and wire == _LEN:
            attr.name = _utf8(value)
        elif number == 2 and wire == _I32:
            attr.f = struct.unpack("<f", value)[0]
        elif number == 3 and wire == _VARINT:
            attr.i = _signed(value)
        elif number == 4 and wire == _LEN:
            attr.s = value
        elif number == 6 and wire == _LEN:
            attr.has_graph = True
        elif number == 7 and wire == _I32:
            floats.append(struct.unpack("<f", value)[0])
        elif number == 8 and wire == _VARINT:
            ints.append(_signed(value))
        elif number == 8 and wire == _LEN:
            # packed repeated int64
            pos = 0
            while pos < len(value):
                v, pos = _read_varint(value, pos)
                ints.append(_signed(v))
    attr.ints = tuple(ints)
    attr.floats = tuple(floats)
    return attr


def _parse_node(buf: bytes) -> Node:
    node = Node(op_type="")
    inputs: list[str] = []
    outputs: list[str] = []
    for number, wire, value in _fields(buf):
        if number == 1 and wire == _LEN:
            inputs.append(_utf8(value))
        elif number == 2 and wire == _LEN:
            outputs.append(_utf8(value))
        elif number == 3 and wire == _LEN:
            node.name = _utf8(value)
        elif number == 4 and wire == _LEN:
            node.op_type = _utf8(value)
        elif number == 5 and wire == _LEN:
            attr = _parse_attribute(value)
            node.attributes[attr.name] = attr
    node.inputs = tuple(inputs)
    node.outputs = tuple(outputs)
    return node


def _parse_tensor(buf: bytes) -> TensorInfo:
    info = TensorInfo(name="")
    dims: list[int] = []
    for number, wire, value in _fields(buf):
        if number == 1 and wire == _VARINT:
            dims.append(_signed(value))
        elif number == 1 and wire == _LEN:
            pos = 0
            while pos < len(value):
                v, pos = _read_varint(value, pos)
                dims.append(_signed(v))
        elif number == 8 and wire == _LEN:
            info.name = _utf8(value)
    info.dims = tuple(dims)
    return info


def _parse_value_info(buf: bytes) -> ValueInfo:
    name = ""
    shape: tuple[int, ...] = ()
    for number, wire, value in _fields(buf):
        if number == 1 and wire == _LEN:
            name = _utf8(value)
        elif number == 2 and wire == _LEN:
            shape = _parse_type_shape(value)
    return ValueInfo(name=name, shape=shape)


def _parse_type_shape(buf: bytes) -> tuple[int, ...]:
    for number, wire, value in _fields(buf):
        if number == 1 and wire == _LEN:  # TypeProto.tensor_type
            for n2, w2, v2 in _fields(value):
                if n2 == 2 and w2 == _LEN:  # Tensor.shape
                    dims: list[int] = []
                    for n3, w3, v3 in _fields(v2):
                        if n3 == 1 and w3 == _LEN:  # TensorShapeProto.dim
                            dim = 0
                            for n4, w4, v4 in _fields(v3):
                                if n4 == 1 and w4 == _VARINT:
                                    dim = _signed(v4)
                            dims.append(dim)
                    return tuple(dims)
    return ()


def _parse_graph(buf: bytes) -> Graph:
    graph = Graph()
    for number, wire, value in _fields(buf):
        if number == 1 and wire == _LEN:
            graph.nodes.append(_parse_node(value))
        elif number == 2 and wire == _LEN:
            graph.name = _utf8(value)
        elif number == 5 and wire == _LEN:
            info = _parse_tensor(value)
            graph.initializers[info.name] = info
        elif number == 11 and wire == _LEN:
            graph.inputs.append(_parse_value_info(value))
        elif number == 12 and wire == _LEN:
            graph.outputs.append(_parse_value_info(value))
    return graph


def parse_model(data: bytes) -> Model:
    """Decode ONNX model bytes into the analyzer's model subset."""
    if not data:
        raise MalformedFile("empty buffer")
    graph = None
    ir_version = 0
    opset = 0
    try:
        for number, wire, value in _fields(data):
            if number == 1 and wire == _VARINT:
                ir_version = _signed(value)
            elif number == 7 and wire == _LEN:
                graph = _parse_graph(value)
            elif number == 8 and wire == _LEN:
                for n2, w2, v2 in _fields(value):
                    if n2 == 2 and w2 == _VARINT:
                        opset = max(opset, _signed(v2))
    except MalformedFile:
        raise
    except Exception as exc:
        raise MalformedFile(str(exc)) from exc
    if graph is None:
        raise MalformedFile("buffer contains no graph")
    return Model(graph=graph, ir_version=ir_version, opset=opset)


# ---------------------------------------------------------------------------
# encoding (tests and fixture generation)


def encode_attribute(
    name: str,
    *,
    i: int | None = None,
    f: float | None = None,
    s: bytes | None = None,
    ints: tuple[int, ...] | list[int] | None = None,
    graph: bytes | None = None,
) -> bytes:
    # AttributeProto.type tags: INT=2, FLOAT=1, STRING=3, INTS=7, GRAPH=5
    out = field_string(1, name)
    if f is not None:
        out += field_float(2, f) + field_varint(20, 1)
    if i is not None:
        out += field_varint(3, i) + field_varint(20, 2)
    if s is not None:
        out += field_bytes(4, s) + field_varint(20, 3)
    if graph is not None:
        out += field_bytes(6, graph) + field_varint(20, 5)
    if ints is not None:
        for v in ints:
            out += field_varint(8, v)
        out += field_varint(20, 7)
    return out


def encode_node(
    op_type: str,
    inputs: list[str],
    outputs: list[str],
    name: str = "",
    attrs: dict | None = None,
) -> bytes:
    out = b"".join(field_string(1, t) for t in inputs)
    out += b"".join(field_string(2, t) for t in outputs)
    if name:
        out += field_string(3, name)
    out += field_string(4, op_type)
    for attr_name, value in (attrs or {}).items():
        if isinstance(value, bytes):
            encoded = encode_attribute(attr_name, s=value)
        elif isinstance(value, bool) or isinstance(value, int):
            encoded = encode_attribute(attr_name, i=int(value))
        elif isinstance(value, float):
            encoded = encode_attribute(attr_name, f=value)
        elif isinstance(value, (list, tuple)):
            encoded = encode_attribute(attr_name, ints=list(value))
        else:
            raise TypeError(f"unsupported attribute value {value!r}")
        out += field_bytes(5, encoded)
    return field_bytes(1, out)


def encode_initializer(name: str, dims: list[int], zero_fill: bool = True) -> bytes:
    out = b"".join(field_varint(1, d) for d in dims)
    out += field_varint(2, 1)  # data_type FLOAT
    out += field_string(8, name)
    if zero_fill:
        count = 1
        for d in dims:
            count *= d
        out += field_bytes(9, b"\x00" * (4 * count))
    return field_bytes(5, out)


def encode_value_info(name: str, shape: list[int], number: int) -> bytes:
    dims = b"".join(
        field_bytes(1, field_varint(1, d)) for d in shape
    )
    tensor_type = field_varint(1, 1) + field_bytes(2, dims)  # elem_type FLOAT, shape
    type_proto = field_bytes(1, tensor_type)
    return field_bytes(number, field_string(1, name) + field_bytes(2, type_proto))


def encode_model(
    nodes: list[bytes],
    inputs: list[tuple[str, list[int]]],
    outputs: list[tuple[str, list[int]]],
    initializers: list[bytes] = (),
    graph_name: str = "graph",
    opset: int = 13,
) -> bytes:
    graph = b"".join(nodes)
    graph += field_string(2, graph_name)
    graph += b"".join(initializers)
    graph += b"".join(encode_value_info(n, s, 11) for n, s in inputs)
    graph += b"".join(encode_value_info(n, s, 12) for n, s in outputs)
    model = field_varint(1, 8)  # ir_version
    model += field_string(2, "rfscope")
    model += field_bytes(7, graph)
    model += field_bytes(8, field_varint(2, opset))
    return model
