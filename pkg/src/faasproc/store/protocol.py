"""Length-prefixed binary framing for store commands.

Frame layout (all integers big-endian)::

    u32 length      bytes that follow this field
    u8  opcode
    u64 request_id
    ... fields      each one u32 length + bytes

Integer fields are 8-byte signed, flags are one byte. Error responses use
opcode 0xFF and carry a raw error-code byte followed by a message field.
Timeouts and TTLs travel in milliseconds; -1 means "no timeout".
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Any

from ..errors import MalformedFrame

HEADER = struct.Struct(">IBQ")
FIELD_LEN = struct.Struct(">I")
I64 = struct.Struct(">q")
MAX_FRAME = 512 * 1024 * 1024


class Op(IntEnum):
    PUSH_TAIL = 0x01
    POP_HEAD_BLOCKING = 0x03
    LIST_LEN = 0x04
    LIST_INDEX_GET = 0x05
    LIST_INDEX_SET = 0x06
    LIST_RANGE = 0x07
    HASH_SET = 0x10
    HASH_GET = 0x11
    HASH_DEL = 0x12
    HASH_GET_ALL = 0x13
    COUNTER_ADD = 0x20
    KEY_DELETE = 0x30
    KEY_EXPIRE = 0x31
    KEY_EXISTS = 0x32
    PING = 0x40


ERROR_OPCODE = 0xFF


class ErrorCode(IntEnum):
    WRONG_TYPE = 0x01
    INDEX_OUT_OF_RANGE = 0x02
    TIMEOUT = 0x03
    MALFORMED = 0x04
    STORE = 0x05
    INTERNAL = 0x06


# Field kinds: "str", "bytes", "int", "flag"; a trailing "*" repeats (>= 1 for
# requests), "?" is zero-or-one, "pairs" is alternating str/bytes.
REQUEST_SCHEMA: dict[Op, tuple[str, ...]] = {
    Op.PUSH_TAIL: ("str", "bytes*"),
    Op.POP_HEAD_BLOCKING: ("str", "int"),
    Op.LIST_LEN: ("str",),
    Op.LIST_INDEX_GET: ("str", "int"),
    Op.LIST_INDEX_SET: ("str", "int", "bytes"),
    Op.LIST_RANGE: ("str", "int", "int"),
    Op.HASH_SET: ("str", "str", "bytes"),
    Op.HASH_GET: ("str", "str"),
    Op.HASH_DEL: ("str", "str"),
    Op.HASH_GET_ALL: ("str",),
    Op.COUNTER_ADD: ("str", "int"),
    Op.KEY_DELETE: ("str",),
    Op.KEY_EXPIRE: ("str", "int"),
    Op.KEY_EXISTS: ("str",),
    Op.PING: (),
}

RESPONSE_SCHEMA: dict[Op, str | None] = {
    Op.PUSH_TAIL: "int",
    Op.POP_HEAD_BLOCKING: "bytes",
    Op.LIST_LEN: "int",
    Op.LIST_INDEX_GET: "bytes",
    Op.LIST_INDEX_SET: None,
    Op.LIST_RANGE: "bytes*",
    Op.HASH_SET: "flag",
    Op.HASH_GET: "bytes?",
    Op.HASH_DEL: "flag",
    Op.HASH_GET_ALL: "pairs",
    Op.COUNTER_ADD: "int",
    Op.KEY_DELETE: "flag",
    Op.KEY_EXPIRE: None,
    Op.KEY_EXISTS: "flag",
    Op.PING: "bytes",
}

COMMAND_NAMES: dict[Op, str] = {op: op.name.lower() for op in Op}
_OPS: dict[int, Op] = {int(op): op for op in Op}
OPCODES: dict[str, Op] = {name: op for op, name in COMMAND_NAMES.items()}


@dataclass(eq=True, slots=True)
class Request:
    op: Op
    request_id: int
    args: tuple

    @property
    def name(self) -> str:
        return COMMAND_NAMES[self.op]


@dataclass(eq=True, slots=True)
class Response:
    op: Op
    request_id: int
    value: Any = None


@dataclass(eq=True, slots=True)
class ErrorResponse:
    request_id: int
    code: ErrorCode
    message: str


# ---------------------------------------------------------------- encoding


def _field(data: bytes) -> bytes:
    return FIELD_LEN.pack(len(data)) + data


def _encode_value(kind: str, value) -> bytes:
    if kind == "str":
        if not isinstance(value, str):
            raise TypeError(f"expected str, got {type(value).__name__}")
        return _field(value.encode("utf-8"))
    if kind == "bytes":
        if not isinstance(value, (bytes, bytearray, memoryview)):
            raise TypeError(f"expected bytes, got {type(value).__name__}")
        return _field(bytes(value))
    if kind == "int":
        return _field(I64.pack(value))
    if kind == "flag":
        return _field(b"\x01" if value else b"\x00")
    raise ValueError(kind)


def _frame(opcode: int, request_id: int, payload: bytes) -> bytes:
    return HEADER.pack(1 + 8 + len(payload), opcode, request_id) + payload


def encode_request(request: Request) -> bytes:
    schema = REQUEST_SCHEMA[request.op]
    parts = []
    args = request.args
    for i, kind in enumerate(schema):
        if kind.endswith("*"):
            rest = args[i:]
            if not rest:
                raise ValueError(f"{request.name} needs at least one {kind[:-1]} value")
            parts.extend(_encode_value(kind[:-1], v) for v in rest)
            break
        parts.append(_encode_value(kind, args[i]))
    else:
        if len(args) != len(schema):
            raise ValueError(f"{request.name} takes {len(schema)} arguments, got {len(args)}")
    return _frame(request.op, request.request_id, b"".join(parts))


def encode_response(response: Response | ErrorResponse) -> bytes:
    if isinstance(response, ErrorResponse):
        payload = bytes([response.code]) + _field(response.message.encode("utf-8"))
        return _frame(ERROR_OPCODE, response.request_id, payload)
    kind = RESPONSE_SCHEMA[response.op]
    value = response.value
    if kind is None:
        payload = b""
    elif kind == "bytes*":
        payload = b"".join(_encode_value("bytes", v) for v in value)
    elif kind == "bytes?":
        payload = b"" if value is None else _encode_value("bytes", value)
    elif kind == "pairs":
        payload = b"".join(_encode_value("str", k) + _encode_value("bytes", v) for k, v in value.items())
    else:
        payload = _encode_value(kind, value)
    return _frame(response.op, response.request_id, payload)


# ---------------------------------------------------------------- decoding


def _split_fields(payload: bytes | memoryview) -> list[bytes]:
    fields = []
    view = memoryview(payload)
    pos = 0
    while pos < len(view):
        if pos + 4 > len(view):
            raise MalformedFrame("truncated field length")
        (n,) = FIELD_LEN.unpack_from(view, pos)
        pos += 4
        if n > len(view) - pos:
            raise MalformedFrame("field length exceeds frame")
        fields.append(bytes(view[pos : pos + n]))
        pos += n
    return fields


def _decode_value(kind: str, raw: bytes):
    if kind == "str":
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFrame("invalid utf-8 in text field") from exc
    if kind == "bytes":
        return raw
    if kind == "int":
        if len(raw) != 8:
            raise MalformedFrame("integer field must be 8 bytes")
        return I64.unpack(raw)[0]
    if kind == "flag":
        if raw not in (b"\x00", b"\x01"):
            raise MalformedFrame("flag field must be one byte 0/1")
        return raw == b"\x01"
    raise ValueError(kind)


def _parse_header(data: bytes | memoryview):
    if len(data) < HEADER.size:
        raise MalformedFrame(f"frame too short ({len(data)} bytes)")
    length, opcode, request_id = HEADER.unpack_from(data, 0)
    if length < 9 or length > MAX_FRAME:
        raise MalformedFrame(f"bad frame length {length}")
    if length + 4 != len(data):
        raise MalformedFrame(f"frame length {length} does not match {len(data) - 4} bytes")
    return opcode, request_id, memoryview(data)[HEADER.size :]


def decode_request(data: bytes) -> Request:
    opcode, request_id, payload = _parse_header(data)
    op = _OPS.get(opcode)
    if op is None:
        raise MalformedFrame(f"unknown opcode 0x{opcode:02x}")
    schema = REQUEST_SCHEMA[op]
    fields = _split_fields(payload)
    args = []
    for i, kind in enumerate(schema):
        if kind.endswith("*"):
            if len(fields) <= i:
                raise MalformedFrame(f"{op.name} needs at least one value")
            args.extend(_decode_value(kind[:-1], f) for f in fields[i:])
            break
        if i >= len(fields):
            raise MalformedFrame(f"{op.name} expects {len(schema)} fields, got {len(fields)}")
        args.append(_decode_value(kind, fields[i]))
    else:
        if len(fields) != len(schema):
            raise MalformedFrame(f"{op.name} expects {len(schema)} fields, got {len(fields)}")
    return Request(op, request_id, tuple(args))


def decode_response(data: bytes) -> Response | ErrorResponse:
    opcode, request_id, payload = _parse_header(data)
    if opcode == ERROR_OPCODE:
        if len(payload) < 1:
            raise MalformedFrame("error frame without code")
        try:
            code = ErrorCode(payload[0])
        except ValueError:
            raise MalformedFrame(f"unknown error code {payload[0]}") from None
        fields = _split_fields(payload[1:])
        if len(fields) != 1:
            raise MalformedFrame("error frame needs exactly one message field")
        return ErrorResponse(request_id, code, _decode_value("str", fields[0]))
    op = _OPS.get(opcode)
    if op is None:
        raise MalformedFrame(f"unknown opcode 0x{opcode:02x}")
    kind = RESPONSE_SCHEMA[op]
    fields = _split_fields(payload)
    if kind is None:
        if fields:
            raise MalformedFrame(f"{op.name} response carries no fields")
        value = None
    elif kind == "bytes*":
        value = fields
    elif kind == "bytes?":
        if len(fields) > 1:
            raise MalformedFrame("optional value has more than one field")
        value = fields[0] if fields else None
    elif kind == "pairs":
        if len(fields) % 2:
            raise MalformedFrame("odd number of fields in pair list")
        value = {_decode_value("str", fields[i]): fields[i + 1] for i in range(0, len(fields), 2)}
    else:
        if len(fields) != 1:
            raise MalformedFrame(f"{op.name} response expects one field")
        value = _decode_value(kind, fields[0])
    return Response(op, request_id, value)


def decode_frame(data: bytes, *, response: bool = False):
    """Decode one complete frame as a request (default) or a response."""
    return decode_response(data) if response else decode_request(data)


def read_frame(read_exact) -> bytes:
    """Read one raw frame using ``read_exact(n)``; returns b"" on clean EOF."""
    head = read_exact(4)
    if not head:
        return b""
    if len(head) < 4:
        raise MalformedFrame("truncated frame header")
    (length,) = FIELD_LEN.unpack(head)
    if length < 9 or length > MAX_FRAME:
        raise MalformedFrame(f"bad frame length {length}")
    body = read_exact(length)
    if len(body) < length:
        raise MalformedFrame("truncated frame body")
    return head + body


# --------------------------------------------- python-level argument mapping


def timeout_to_ms(timeout) -> int:
    return -1 if timeout is None else max(int(round(timeout * 1000.0)), 0)


def ms_to_timeout(ms: int):
    return None if ms < 0 else ms / 1000.0


def engine_args(request: Request) -> tuple:
    """Convert wire arguments to the engine's Python-level arguments."""
    if request.op is Op.POP_HEAD_BLOCKING:
        key, ms = request.args
        return key, ms_to_timeout(ms)
    if request.op is Op.KEY_EXPIRE:
        key, ms = request.args
        return key, ms / 1000.0
    return request.args


def wire_args(name: str, args: tuple) -> tuple:
    """Inverse of :func:`engine_args` for a command name and Python arguments."""
    if name == "pop_head_blocking":
        key, *rest = args
        return key, timeout_to_ms(rest[0] if rest else None)
    if name == "key_expire":
        key, ttl = args
        return key, max(int(round(ttl * 1000.0)), 0)
    return tuple(args)
