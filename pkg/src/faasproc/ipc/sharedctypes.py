"""Shared Array and Value: one list element per scalar.

Every element read or write is a single store round trip; slices use one
ranged read or one batch of writes.
"""

from __future__ import annotations

import struct

from ..errors import IndexOutOfRange
from . import codec
from .base import ARRAY, DEFAULT_TTL, VALUE, Resource
from .synchronize import TOKEN, _TokenLock

_FIELDS = struct.Struct(">BIB")


class _LockView:
    """The lock guarding an Array/Value, usable like :class:`Lock`."""

    def __init__(self, res: "_Scalars"):
        self._res = res
        self._core = res._lock

    def acquire(self, block: bool = True, timeout: float | None = None) -> bool:
        return self._core.acquire(block, timeout)

    def release(self) -> None:
        self._core.release()

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, *exc):
        self.release()


class _Scalars(Resource):
    def _init(self, typecode, values: list, lock: bool, store, ttl: int) -> None:
        self.tag = codec.tag_for(typecode)
        encoded = [codec.encode(self.tag, v) for v in values]
        self.length = len(encoded)
        self.has_lock = bool(lock)
        self.key_names = ("data", "lock") if self.has_lock else ("data",)

        def seed():
            calls = [("push_tail", (self.key("data"), *encoded))] if encoded else []
            if self.has_lock:
                calls.append(("push_tail", (self.key("lock"), TOKEN)))
            return calls

        self._create(store, ttl, seed)
        self._setup()

    def _setup(self) -> None:
        self._lock = _TokenLock(self, self.key("lock")) if self.has_lock else None

    def _fields(self) -> bytes:
        return _FIELDS.pack(self.tag, self.length, int(self.has_lock))

    def _load_fields(self, data: bytes) -> None:
        self.tag, self.length, lock = _FIELDS.unpack(data[: _FIELDS.size])
        self.has_lock = bool(lock)
        self.key_names = ("data", "lock") if self.has_lock else ("data",)
        self._setup()

    @property
    def typecode(self) -> str:
        return codec.TAG_NAMES[self.tag]

    def get_lock(self) -> _LockView:
        if not self.has_lock:
            raise AttributeError("created with lock=False")
        return _LockView(self)

    def acquire(self, block: bool = True, timeout: float | None = None) -> bool:
        return self.get_lock().acquire(block, timeout)

    def release(self) -> None:
        self.get_lock().release()

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, *exc):
        self.release()

    def _index(self, i: int) -> int:
        if not isinstance(i, int):
            raise TypeError("indices must be integers or slices")
        j = i + self.length if i < 0 else i
        if not 0 <= j < self.length:
            raise IndexOutOfRange(f"index {i} out of range for length {self.length}")
        return j

    def _get(self, i: int):
        self._touch()
        return codec.decode(self._store.list_index_get(self.key("data"), self._index(i)), self.tag)

    def _set(self, i: int, value) -> None:
        self._touch()
        self._store.list_index_set(self.key("data"), self._index(i), codec.encode(self.tag, value))

    def _get_slice(self, s: slice) -> list:
        self._touch()
        start, stop, step = s.indices(self.length)
        idx = range(start, stop, step)
        if not idx:
            return []
        data = self.key("data")
        if step == 1:
            raw = self._store.list_range(data, start, stop - 1)
        else:
            raw = self._store.batch([("list_index_get", (data, i)) for i in idx])
        return [codec.decode(r, self.tag) for r in raw]

    def _set_slice(self, s: slice, values) -> None:
        self._touch()
        idx = range(*s.indices(self.length))
        values = list(values)
        if len(values) != len(idx):
            raise ValueError(f"slice assignment needs {len(idx)} values, got {len(values)}")
        encoded = [codec.encode(self.tag, v) for v in values]
        if encoded:
            data = self.key("data")
            self._store.batch([("list_index_set", (data, i, e)) for i, e in zip(idx, encoded)])


class Array(_Scalars):
    """Fixed-length shared array of int64, float64, bool or char elements."""

    kind = ARRAY

    def __init__(self, typecode_or_type, size_or_initializer, *, lock: bool = True, store=None, ttl: int = DEFAULT_TTL):
        tag = codec.tag_for(typecode_or_type)
        if isinstance(size_or_initializer, int):
            if size_or_initializer < 0:
                raise ValueError("array size must be >= 0")
            values = [codec.DEFAULTS[tag]] * size_or_initializer
        else:
            values = list(size_or_initializer)
        self._init(tag, values, lock, store, ttl)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self._get_slice(i)
        return self._get(i)

    def __setitem__(self, i, value) -> None:
        if isinstance(i, slice):
            self._set_slice(i, value)
        else:
            self._set(i, value)

    def __iter__(self):
        return iter(self[:])

    def tolist(self) -> list:
        return self[:]


class Value(_Scalars):
    """A single shared scalar (an Array of length one)."""

    kind = VALUE

    def __init__(self, typecode_or_type, value=None, *, lock: bool = True, store=None, ttl: int = DEFAULT_TTL):
        tag = codec.tag_for(typecode_or_type)
        self._init(tag, [codec.DEFAULTS[tag] if value is None else value], lock, store, ttl)

    @property
    def value(self):
        return self._get(0)

    @value.setter
    def value(self, v) -> None:
        self._set(0, v)

    def __repr__(self):
        return f"<Value {self.typecode} {self.uuid.hex[:8]}>"
