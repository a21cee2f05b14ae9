"""Pipes and queues backed by store lists."""

from __future__ import annotations

import pickle
import struct
from collections import deque

from ..errors import Empty, Full, Timeout
from .base import PIPE, QUEUE, DEFAULT_TTL, Resource, timeout_arg

_SLOT = b"\x01"


class Connection(Resource):
    """One end of a :func:`Pipe`.

    Each end owns an inbound list; ``send`` appends to the peer's list and
    ``recv`` blocking-pops our own, so every direction is a FIFO.
    """

    kind = PIPE
    key_names = ("0", "1")

    def _load_fields(self, data: bytes) -> None:
        self.end, duplex = struct.unpack(">BB", data[:2])
        self.duplex = bool(duplex)
        self._peeked: deque = deque()

    def _fields(self) -> bytes:
        return struct.pack(">BB", self.end, int(self.duplex))

    @property
    def readable(self) -> bool:
        return self.duplex or self.end == 0

    @property
    def writable(self) -> bool:
        return self.duplex or self.end == 1

    @property
    def _inbox(self) -> str:
        return self.key(str(self.end))

    @property
    def _outbox(self) -> str:
        return self.key(str(1 - self.end))

    def send_bytes(self, data: bytes) -> None:
        self._touch()
        if not self.writable:
            raise OSError("connection is read-only")
        self._store.push_tail(self._outbox, bytes(data))

    def recv_bytes(self, timeout: float | None = None) -> bytes:
        """Next message; raises Timeout if none arrives within ``timeout``."""
        self._touch()
        if not self.readable:
            raise OSError("connection is write-only")
        if self._peeked:
            return self._peeked.popleft()
        return self._store.pop_head_blocking(self._inbox, timeout)

    def send(self, obj) -> None:
        self.send_bytes(pickle.dumps(obj, protocol=pickle.HIGHEST_PROTOCOL))

    def recv(self, timeout: float | None = None):
        return pickle.loads(self.recv_bytes(timeout))

    def poll(self, timeout: float | None = 0.0) -> bool:
        """Whether a message is available, waiting up to ``timeout`` seconds."""
        self._touch()
        if self._peeked:
            return True
        if not timeout:
            return self._store.list_len(self._inbox) > 0
        try:
            self._peeked.append(self._store.pop_head_blocking(self._inbox, timeout))
        except Timeout:
            return False
        return True

    def close(self) -> None:
        self.drop()

    @property
    def closed(self) -> bool:
        return self.dropped

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def Pipe(duplex: bool = True, *, store=None, ttl: int = DEFAULT_TTL) -> tuple[Connection, Connection]:
    """Two connected ends; with ``duplex=False`` the first only receives."""
    first = Connection.__new__(Connection)
    first._create(store, ttl, refs=2)
    first._load_fields(struct.pack(">BB", 0, int(duplex)))
    second = Connection.from_bytes(first.to_bytes()[:-2] + struct.pack(">BB", 1, int(duplex)), first.store)
    return first, second


class Queue(Resource):
    """A multi-producer multi-consumer FIFO of picklable items.

    Bounded queues keep a second list of free-slot tokens: ``put`` takes a
    token before appending and ``get`` returns one after removing an item.
    """

    kind = QUEUE

    def __init__(self, maxsize: int = 0, *, store=None, ttl: int = DEFAULT_TTL):
        if maxsize < 0:
            raise ValueError("maxsize must be >= 0")
        self.maxsize = maxsize
        self.key_names = ("items", "slots") if maxsize else ("items",)
        self._create(store, ttl, lambda: [("push_tail", (self.key("slots"), *[_SLOT] * maxsize))] if maxsize else [])

    def _fields(self) -> bytes:
        return struct.pack(">I", self.maxsize)

    def _load_fields(self, data: bytes) -> None:
        (self.maxsize,) = struct.unpack(">I", data[:4])
        self.key_names = ("items", "slots") if self.maxsize else ("items",)

    def put(self, item, block: bool = True, timeout: float | None = None) -> None:
        self.put_bytes(pickle.dumps(item, protocol=pickle.HIGHEST_PROTOCOL), block, timeout)

    def put_bytes(self, data: bytes, block: bool = True, timeout: float | None = None) -> None:
        self._touch()
        if self.maxsize:
            try:
                self._store.pop_head_blocking(self.key("slots"), timeout_arg(block, timeout))
            except Timeout:
                raise Full("queue is full") from None
        self._store.push_tail(self.key("items"), data)

    def get(self, block: bool = True, timeout: float | None = None):
        return pickle.loads(self.get_bytes(block, timeout))

    def get_bytes(self, block: bool = True, timeout: float | None = None) -> bytes:
        self._touch()
        try:
            data = self._store.pop_head_blocking(self.key("items"), timeout_arg(block, timeout))
        except Timeout:
            raise Empty("queue is empty") from None
        if self.maxsize:
            self._store.push_tail(self.key("slots"), _SLOT)
        return data

    def put_nowait(self, item) -> None:
        self.put(item, block=False)

    def get_nowait(self):
        return self.get(block=False)

    def qsize(self) -> int:
        self._touch()
        return self._store.list_len(self.key("items"))

    def empty(self) -> bool:
        return self.qsize() == 0

    def full(self) -> bool:
        return bool(self.maxsize) and self.qsize() >= self.maxsize

    def close(self) -> None:
        self.drop()

    def join_thread(self) -> None:
        pass

