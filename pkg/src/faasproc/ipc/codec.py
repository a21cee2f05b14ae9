"""Fixed-width scalar encoding for Array and Value elements."""

from __future__ import annotations

import struct

from ..errors import TypeMismatch

INT64, FLOAT64, BOOL, CHAR = 1, 2, 3, 4

_PACK = {
    INT64: struct.Struct("<q"),
    FLOAT64: struct.Struct("<d"),
    BOOL: struct.Struct("<?"),
    CHAR: struct.Struct("<c"),
}
TAG_NAMES = {INT64: "int64", FLOAT64: "float64", BOOL: "bool", CHAR: "char"}
DEFAULTS = {INT64: 0, FLOAT64: 0.0, BOOL: False, CHAR: b"\x00"}

# multiprocessing/array typecodes, folded onto the four storable types
TYPECODES = {
    **dict.fromkeys("bBhHiIlLqQnN", INT64),
    **dict.fromkeys("fdg", FLOAT64),
    "?": BOOL,
    "c": CHAR,
}


def tag_for(typecode_or_type) -> int:
    """Resolve a typecode (``"i"``, ``"d"``...), ctypes type or tag to a tag."""
    if isinstance(typecode_or_type, int) and typecode_or_type in _PACK:
        return typecode_or_type
    if isinstance(typecode_or_type, str) and typecode_or_type in TAG_NAMES.values():
        return next(t for t, n in TAG_NAMES.items() if n == typecode_or_type)
    code = getattr(typecode_or_type, "_type_", typecode_or_type)
    try:
        return TYPECODES[code]
    except (KeyError, TypeError):
        raise TypeMismatch(f"unsupported element type {typecode_or_type!r}") from None


def check(tag: int, value):
    """Coerce ``value`` to the Python type of ``tag`` or raise TypeMismatch."""
    if tag == INT64:
        if isinstance(value, int):
            if not -(2**63) <= value < 2**63:
                raise TypeMismatch(f"{value} does not fit in int64")
            return int(value)
    elif tag == FLOAT64:
        if isinstance(value, (int, float)):
            return float(value)
    elif tag == BOOL:
        if isinstance(value, (bool, int)) and value in (0, 1):
            return bool(value)
    elif tag == CHAR:
        if isinstance(value, (bytes, bytearray)) and len(value) == 1:
            return bytes(value)
    raise TypeMismatch(f"{value!r} is not a valid {TAG_NAMES[tag]}")


def encode(tag: int, value) -> bytes:
    return bytes([tag]) + _PACK[tag].pack(check(tag, value))


def decode(data: bytes, expect: int | None = None):
    tag = data[0]
    if tag not in _PACK or len(data) != 1 + _PACK[tag].size:
        raise TypeMismatch(f"malformed scalar {data!r}")
    if expect is not None and tag != expect:
        raise TypeMismatch(f"stored {TAG_NAMES[tag]}, expected {TAG_NAMES[expect]}")
    return _PACK[tag].unpack_from(data, 1)[0]
