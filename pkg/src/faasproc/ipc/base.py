"""Reference-counted handles to shared resources living in the store.

Every resource owns the keys under ``rsrc/{uuid}/`` plus a refcount at
``rsrc/{uuid}/refs``. Creating a handle counts one reference, cloning adds
one, dropping removes one, and the drop that reaches zero deletes every key
in the same batch. All keys also carry a TTL so a resource whose holders
died without dropping still disappears eventually.
"""

from __future__ import annotations

import struct
import threading
import time
import uuid as _uuid

from .. import context
from ..errors import DroppedResource, MalformedFrame

PIPE, QUEUE, SEMAPHORE, LOCK, CONDITION, BARRIER, EVENT, ARRAY, VALUE, MANAGER_DICT, MANAGER_LIST, MANAGER_OBJECT = range(1, 13)
KIND_NAMES = {
    PIPE: "pipe",
    QUEUE: "queue",
    SEMAPHORE: "semaphore",
    LOCK: "lock",
    CONDITION: "condition",
    BARRIER: "barrier",
    EVENT: "event",
    ARRAY: "array",
    VALUE: "value",
    MANAGER_DICT: "manager_dict",
    MANAGER_LIST: "manager_list",
    MANAGER_OBJECT: "manager_object",
}

DEFAULT_TTL = 3600
HEADER = struct.Struct(">B16sI")
_KINDS: dict[int, type] = {}


def resource_prefix(uid: _uuid.UUID) -> str:
    return f"rsrc/{uid.hex}/"


class Resource:
    """Base class of every shared-resource handle."""

    kind: int = 0
    key_names: tuple[str, ...] = ()

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        if cls.__dict__.get("kind"):
            _KINDS[cls.kind] = cls

    # -------------------------------------------------------------- set up

    def _attach(self, store, uid: _uuid.UUID, ttl: int) -> None:
        self._store = store if store is not None else context.current_store()
        self.uuid = uid
        self.ttl = int(ttl)
        self.prefix = resource_prefix(uid)
        self.refs_key = self.prefix + "refs"
        self._dropped = False
        self._drop_lock = threading.Lock()
        self._touched = time.monotonic()

    def _create(self, store, ttl: int, init=None, refs: int = 1) -> None:
        """Allocate a fresh uuid, arm TTLs, seed data and count ``refs`` references.

        ``init`` is called once the keys are known and returns the batch
        commands that seed the resource's data.
        """
        if ttl < 1 or ttl >= 2**32:
            raise ValueError("ttl must be a positive number of seconds")
        self._attach(store, _uuid.uuid4(), ttl)
        seed = init() if init is not None else []
        self._store.batch([*self._expire_calls(), *seed, ("counter_add", (self.refs_key, refs))])

    def key(self, name: str) -> str:
        return self.prefix + name

    @property
    def data_keys(self) -> list[str]:
        return [self.key(n) for n in self.key_names]

    @property
    def store(self):
        return self._store

    def _expire_calls(self) -> list:
        return [("key_expire", (k, self.ttl)) for k in (*self.data_keys, self.refs_key)]

    def _touch(self) -> None:
        """Check liveness and re-arm TTLs, at most every quarter TTL."""
        if self._dropped:
            raise DroppedResource(f"{KIND_NAMES[self.kind]} {self.uuid.hex} was dropped")
        now = time.monotonic()
        if now - self._touched >= self.ttl / 4:
            self._touched = now
            self._store.batch(self._expire_calls())

    # -------------------------------------------------------- serialization

    def _fields(self) -> bytes:
        return b""

    def _load_fields(self, data: bytes) -> None:
        pass

    def to_bytes(self) -> bytes:
        return HEADER.pack(self.kind, self.uuid.bytes, self.ttl) + self._fields()

    @classmethod
    def from_bytes(cls, data: bytes, store=None) -> "Resource":
        """Rebuild a handle from its serialized form without taking a reference."""
        if len(data) < HEADER.size:
            raise MalformedFrame("truncated resource handle")
        kind, raw, ttl = HEADER.unpack_from(data)
        klass = _KINDS.get(kind)
        if klass is None:
            raise MalformedFrame(f"unknown resource kind {kind}")
        obj = klass.__new__(klass)
        obj._attach(store, _uuid.UUID(bytes=raw), ttl)
        obj._load_fields(data[HEADER.size:])
        return obj

    def __reduce__(self):
        # The receiver adopts a reference taken here, before the bytes leave.
        return _restore, (self._clone_bytes(),)

    # ------------------------------------------------------ reference count

    def _clone_bytes(self) -> bytes:
        self._touch()
        self._clone_refs()
        return self.to_bytes()

    def _clone_refs(self) -> None:
        refs = self._store.counter_add(self.refs_key, 1)
        if refs <= 1:
            self._store.counter_add(self.refs_key, -1)
            raise DroppedResource(f"{KIND_NAMES[self.kind]} {self.uuid.hex} no longer exists")
        for child in self._children():
            child._clone_refs()

    def clone(self) -> "Resource":
        """A new handle on the same resource, holding its own reference."""
        return Resource.from_bytes(self._clone_bytes(), self._store)

    def _children(self) -> list["Resource"]:
        return []

    def drop(self) -> None:
        """Release this handle's reference; the last one deletes the resource."""
        with self._drop_lock:
            if self._dropped:
                return
            self._dropped = True
        if self._store.counter_add(self.refs_key, -1) <= 0:
            self._store.batch([("key_delete", (k,)) for k in (*self._all_keys(), self.refs_key)])
        for child in self._children():
            child.drop()

    def _all_keys(self) -> list[str]:
        """Every key the resource may own, including transient ones."""
        return self.data_keys

    @property
    def dropped(self) -> bool:
        return self._dropped

    def refcount(self) -> int:
        return self._store.counter_add(self.refs_key, 0)

    def __eq__(self, other):
        return isinstance(other, Resource) and other.uuid == self.uuid and other.kind == self.kind

    def __hash__(self):
        return hash((self.kind, self.uuid))

    def __repr__(self):
        state = " dropped" if self._dropped else ""
        return f"<{type(self).__name__} {self.uuid.hex[:8]}{state}>"


def _restore(data: bytes) -> Resource:
    handle = Resource.from_bytes(data)
    context.adopt(handle)
    return handle


def pack_str(s: str) -> bytes:
    raw = s.encode()
    return struct.pack(">I", len(raw)) + raw


def unpack_str(data: bytes, offset: int = 0) -> tuple[str, int]:
    (n,) = struct.unpack_from(">I", data, offset)
    offset += 4
    return data[offset : offset + n].decode(), offset + n


def pack_blob(b: bytes) -> bytes:
    return struct.pack(">I", len(b)) + b


def unpack_blob(data: bytes, offset: int = 0) -> tuple[bytes, int]:
    (n,) = struct.unpack_from(">I", data, offset)
    offset += 4
    return data[offset : offset + n], offset + n


def timeout_arg(block: bool, timeout: float | None) -> float | None:
    """Store pop timeout for multiprocessing-style ``block``/``timeout`` pairs."""
    if not block:
        return 0.0
    if timeout is not None and timeout < 0:
        raise ValueError("timeout must be non-negative")
    return timeout
