"""Multiplexing client for the store server.

One socket carries any number of outstanding requests; a reader thread matches
responses to callers by request id, so a parked pop does not hold up other
commands issued through the same client.
"""

from __future__ import annotations

import itertools
import logging
import socket
import threading
from typing import Optional

from ..errors import (
    ConnectionClosed,
    IndexOutOfRange,
    MalformedFrame,
    StoreError,
    StoreUnreachable,
    Timeout,
    TransportTimeout,
    WrongType,
)
from . import protocol as p
from .server import parse_address

logger = logging.getLogger(__name__)

_ERRORS = {
    p.ErrorCode.WRONG_TYPE: WrongType,
    p.ErrorCode.INDEX_OUT_OF_RANGE: IndexOutOfRange,
    p.ErrorCode.TIMEOUT: Timeout,
    p.ErrorCode.MALFORMED: MalformedFrame,
    p.ErrorCode.STORE: StoreError,
    p.ErrorCode.INTERNAL: StoreError,
}


class _Slot:
    """One outstanding request. ``done`` starts held; the reader releases it."""

    __slots__ = ("done", "response")

    def __init__(self):
        self.done = threading.Lock()
        self.done.acquire()
        self.response = None

    def set(self):
        self.done.release()

    def wait(self, timeout: Optional[float]) -> bool:
        return self.done.acquire(timeout=-1 if timeout is None else max(timeout, 0.0))


class StoreClient:
    """Client with the same command methods as :class:`StoreEngine`.

    ``timeout`` is the default transport timeout for non-blocking commands.
    Blocking pops use their command timeout plus ``pop_slack`` unless an
    explicit ``transport_timeout`` is given.
    """

    def __init__(self, address: str, timeout: float = 30.0, pop_slack: float = 5.0, connect_timeout: float = 5.0):
        self.address = address
        self.timeout = timeout
        self.pop_slack = pop_slack
        try:
            self._sock = socket.create_connection(parse_address(address), timeout=connect_timeout)
        except OSError as exc:
            raise StoreUnreachable(f"cannot connect to store at {address}: {exc}") from exc
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._rfile = self._sock.makefile("rb")
        self._ids = itertools.count(1)
        self._pending: dict[int, _Slot] = {}
        self._lock = threading.Lock()
        self._write_lock = threading.Lock()
        self._closed: Optional[BaseException] = None
        self._reader = threading.Thread(target=self._read_loop, name="store-client", daemon=True)
        self._reader.start()

    # --------------------------------------------------------------- core

    def _read_loop(self):
        reason: BaseException = ConnectionClosed("connection closed by server")
        try:
            while True:
                raw = p.read_frame(self._rfile.read)
                if not raw:
                    break
                response = p.decode_response(raw)
                with self._lock:
                    slot = self._pending.pop(response.request_id, None)
                if slot is not None:
                    slot.response = response
                    slot.set()
        except (OSError, ValueError, MalformedFrame) as exc:
            reason = ConnectionClosed(f"connection lost: {exc}")
        with self._lock:
            if self._closed is None:
                self._closed = reason
            pending = list(self._pending.values())
            self._pending.clear()
        for slot in pending:
            slot.set()

    def _send(self, request: p.Request) -> _Slot:
        return self._send_many([request])[0]

    def _send_many(self, requests: list) -> list[_Slot]:
        slots = [_Slot() for _ in requests]
        data = b"".join(p.encode_request(r) for r in requests)
        with self._lock:
            if self._closed is not None:
                raise ConnectionClosed(str(self._closed))
            for request, slot in zip(requests, slots):
                self._pending[request.request_id] = slot
        try:
            with self._write_lock:
                self._sock.sendall(data)
        except OSError as exc:
            with self._lock:
                for request in requests:
                    self._pending.pop(request.request_id, None)
            raise ConnectionClosed(f"send failed: {exc}") from exc
        return slots

    def _wait(self, request: p.Request, slot: _Slot, timeout: Optional[float]):
        if not slot.wait(timeout):
            with self._lock:
                self._pending.pop(request.request_id, None)
            raise TransportTimeout(f"{request.name} got no response within {timeout}s")
        response = slot.response
        if response is None:
            raise ConnectionClosed(str(self._closed))
        if isinstance(response, p.ErrorResponse):
            raise _ERRORS.get(response.code, StoreError)(response.message)
        return response.value

    def call(self, name: str, *args, transport_timeout: Optional[float] = None):
        """Issue one command by engine method name with Python-level arguments."""
        op = p.OPCODES[name]
        request = p.Request(op, next(self._ids), p.wire_args(name, args))
        slot = self._send(request)
        return self._wait(request, slot, self.timeout if transport_timeout is None else transport_timeout)

    def batch(self, calls):
        """Pipeline ``[(command_name, args), ...]``: one network round trip.

        Results come back in call order; the first failing command raises
        after every response has arrived.
        """
        requests = [p.Request(p.OPCODES[name], next(self._ids), p.wire_args(name, args)) for name, args in calls]
        if not requests:
            return []
        results, error = [], None
        for request, slot in zip(requests, self._send_many(requests)):
            try:
                results.append(self._wait(request, slot, self.timeout))
            except (StoreError, Timeout) as exc:
                error = error or exc
                results.append(exc)
        if error is not None:
            raise error
        return results

    def close(self):
        with self._lock:
            if self._closed is None:
                self._closed = ConnectionClosed("client closed")
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        self._reader.join(timeout=2.0)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # ------------------------------------------------------------ commands

    def push_tail(self, key: str, *values: bytes) -> int:
        return self.call("push_tail", key, *values)

    def pop_head_blocking(self, key: str, timeout: Optional[float] = None, *, transport_timeout: Optional[float] = None) -> bytes:
        if transport_timeout is None:
            transport_timeout = None if timeout is None else timeout + self.pop_slack
        elif timeout is None or transport_timeout <= timeout:
            raise ValueError("transport timeout must exceed the pop timeout")
        return self.call("pop_head_blocking", key, timeout, transport_timeout=transport_timeout)

    def list_len(self, key: str) -> int:
        return self.call("list_len", key)

    def list_index_get(self, key: str, index: int) -> bytes:
        return self.call("list_index_get", key, index)

    def list_index_set(self, key: str, index: int, value: bytes) -> None:
        return self.call("list_index_set", key, index, value)

    def list_range(self, key: str, start: int, stop: int) -> list[bytes]:
        return self.call("list_range", key, start, stop)

    def hash_set(self, key: str, field: str, value: bytes) -> bool:
        return self.call("hash_set", key, field, value)

    def hash_get(self, key: str, field: str) -> Optional[bytes]:
        return self.call("hash_get", key, field)

    def hash_del(self, key: str, field: str) -> bool:
        return self.call("hash_del", key, field)

    def hash_get_all(self, key: str) -> dict[str, bytes]:
        return self.call("hash_get_all", key)

    def counter_add(self, key: str, delta: int) -> int:
        return self.call("counter_add", key, delta)

    def key_delete(self, key: str) -> bool:
        return self.call("key_delete", key)

    def key_expire(self, key: str, ttl: float) -> None:
        return self.call("key_expire", key, ttl)

    def key_exists(self, key: str) -> bool:
        return self.call("key_exists", key)

    def ping(self) -> bytes:
        return self.call("ping")
