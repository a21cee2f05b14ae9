"""Embedded in-memory list/hash/counter store.

All commands are applied under one lock, which acts as the sequencer: every
command observes and produces a single total order. Blocking pops never hold
the lock while parked; waiters sit in a per-key FIFO and are resolved by the
pushing command, by their own deadline, or by cancellation.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..errors import IndexOutOfRange, StoreError, Timeout, WrongType

logger = logging.getLogger(__name__)

LIST, HASH, COUNTER = "list", "hash", "counter"

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class _ByteList:
    """List with O(1) head removal and O(1) indexed access."""

    __slots__ = ("items", "head")

    def __init__(self):
        self.items: list[bytes] = []
        self.head = 0

    def __len__(self):
        return len(self.items) - self.head

    def popleft(self) -> bytes:
        value = self.items[self.head]
        self.items[self.head] = b""
        self.head += 1
        if self.head > 64 and self.head * 2 > len(self.items):
            del self.items[: self.head]
            self.head = 0
        return value

    def resolve(self, index: int) -> int:
        n = len(self)
        if index < 0:
            index += n
        if not 0 <= index < n:
            raise IndexOutOfRange(f"index out of range: {index}")
        return self.head + index

    def slice(self, start: int, stop: int) -> list[bytes]:
        n = len(self)
        if start < 0:
            start = max(start + n, 0)
        if stop < 0:
            stop += n
        stop = min(stop, n - 1)
        if start > stop:
            return []
        return self.items[self.head + start : self.head + stop + 1]


@dataclass
class _Entry:
    kind: str
    value: object
    ttl_ms: Optional[int] = None
    deadline: Optional[float] = None


@dataclass(eq=False)
class WaiterTicket:
    key: str
    arrival_seq: int
    deadline: Optional[float]
    callback: Callable[[Optional[bytes]], None] = field(repr=False)
    consumed: bool = False


class StoreEngine:
    """Thread-safe embedded store.

    ``clock`` returns milliseconds and exists so expiry can be tested with a
    stepped clock; :meth:`tick` then processes due timers synchronously.
    """

    def __init__(self, sweep_interval: float = 0.5, clock: Callable[[], float] | None = None):
        self._clock = clock or (lambda: time.monotonic() * 1000.0)
        self._sweep_ms = sweep_interval * 1000.0
        self._lock = threading.Lock()
        self._wakeup = threading.Condition(self._lock)
        self._data: dict[str, _Entry] = {}
        # TTL policies of keys that are currently absent (emptied or pre-armed).
        self._ghosts: dict[str, tuple[int, float]] = {}
        self._ttl_keys: set[str] = set()
        self._waiters: dict[str, deque[WaiterTicket]] = {}
        self._timers: list[tuple[float, int, WaiterTicket]] = []
        self._seq = itertools.count()
        self._next_sweep = self._clock() + self._sweep_ms
        self._closed = False
        self._thread = threading.Thread(target=self._timer_loop, name="store-timers", daemon=True)
        self._thread.start()

    # ------------------------------------------------------------------ lists

    def push_tail(self, key: str, *values: bytes) -> int:
        return self._run(self._push_tail, key, *values)

    def _push_tail(self, fired, key, *values):
        if not values:
            raise StoreError("push_tail needs at least one value")
        entry = self._get(key, LIST, create=True)
        lst = entry.value
        lst.items.extend(bytes(v) for v in values)
        length = len(lst)
        waiters = self._waiters.get(key)
        while waiters and len(lst):
            ticket = waiters.popleft()
            if ticket.consumed:
                continue
            ticket.consumed = True
            fired.append((ticket.callback, lst.popleft()))
        if waiters is not None and not waiters:
            del self._waiters[key]
        if not len(lst):
            self._drop_empty(key, entry)
        return length

    def pop_head_async(
        self, key: str, timeout: Optional[float], callback: Callable[[Optional[bytes]], None]
    ) -> Optional[WaiterTicket]:
        """Pop the head of ``key`` or park until a push or ``timeout`` seconds.

        ``callback`` is called exactly once, with the value or with ``None`` on
        timeout, and never while the engine lock is held. Returns the parked
        ticket (for :meth:`cancel`) or ``None`` when resolved immediately.
        """
        with self._lock:
            entry = self._get(key, LIST)
            queued = self._waiters.get(key)
            if entry is not None and not queued:
                value = entry.value.popleft()
                if not len(entry.value):
                    self._drop_empty(key, entry)
                result = value
            elif timeout is not None and timeout <= 0:
                result = None
            else:
                deadline = None if timeout is None else self._clock() + timeout * 1000.0
                ticket = WaiterTicket(key, next(self._seq), deadline, callback)
                self._waiters.setdefault(key, deque()).append(ticket)
                if deadline is not None:
                    heapq.heappush(self._timers, (deadline, ticket.arrival_seq, ticket))
                    self._wakeup.notify()
                return ticket
        callback(result)
        return None

    def pop_head_blocking(self, key: str, timeout: Optional[float] = None) -> bytes:
        done = threading.Event()
        box: list = []

        def deliver(value):
            box.append(value)
            done.set()

        self.pop_head_async(key, timeout, deliver)
        done.wait()
        if box[0] is None:
            raise Timeout(f"pop on {key!r} timed out")
        return box[0]

    def _pop_now(self, fired, key, timeout=0):
        # Non-blocking pop for use inside batches; only timeout 0 is allowed.
        if timeout is None or timeout > 0:
            raise StoreError("blocking pop cannot be batched")
        entry = self._get(key, LIST)
        if entry is None or self._waiters.get(key):
            raise Timeout(f"pop on {key!r} timed out")
        value = entry.value.popleft()
        if not len(entry.value):
            self._drop_empty(key, entry)
        return value

    def cancel(self, ticket: WaiterTicket) -> bool:
        """Withdraw a parked waiter without invoking its callback."""
        with self._lock:
            if ticket.consumed:
                return False
            ticket.consumed = True
            self._unpark(ticket)
            return True

    def list_len(self, key: str) -> int:
        return self._run(self._list_len, key)

    def _list_len(self, fired, key):
        entry = self._get(key, LIST)
        return 0 if entry is None else len(entry.value)

    def list_index_get(self, key: str, index: int) -> bytes:
        return self._run(self._list_index_get, key, index)

    def _list_index_get(self, fired, key, index):
        entry = self._get(key, LIST)
        if entry is None:
            raise IndexOutOfRange(f"no such list: {key!r}")
        lst = entry.value
        return lst.items[lst.resolve(index)]

    def list_index_set(self, key: str, index: int, value: bytes) -> None:
        return self._run(self._list_index_set, key, index, value)

    def _list_index_set(self, fired, key, index, value):
        entry = self._get(key, LIST)
        if entry is None:
            raise IndexOutOfRange(f"no such list: {key!r}")
        lst = entry.value
        lst.items[lst.resolve(index)] = bytes(value)

    def list_range(self, key: str, start: int, stop: int) -> list[bytes]:
        return self._run(self._list_range, key, start, stop)

    def _list_range(self, fired, key, start, stop):
        entry = self._get(key, LIST)
        return [] if entry is None else entry.value.slice(start, stop)

    # ----------------------------------------------------------------- hashes

    def hash_set(self, key: str, field: str, value: bytes) -> bool:
        return self._run(self._hash_set, key, field, value)

    def _hash_set(self, fired, key, field, value):
        mapping = self._get(key, HASH, create=True).value
        created = field not in mapping
        mapping[field] = bytes(value)
        return created

    def hash_get(self, key: str, field: str) -> Optional[bytes]:
        return self._run(self._hash_get, key, field)

    def _hash_get(self, fired, key, field):
        entry = self._get(key, HASH)
        return None if entry is None else entry.value.get(field)

    def hash_del(self, key: str, field: str) -> bool:
        return self._run(self._hash_del, key, field)

    def _hash_del(self, fired, key, field):
        entry = self._get(key, HASH)
        if entry is None or field not in entry.value:
            return False
        del entry.value[field]
        if not entry.value:
            self._drop_empty(key, entry)
        return True

    def hash_get_all(self, key: str) -> dict[str, bytes]:
        return self._run(self._hash_get_all, key)

    def _hash_get_all(self, fired, key):
        entry = self._get(key, HASH)
        return {} if entry is None else dict(entry.value)

    # --------------------------------------------------------------- counters

    def counter_add(self, key: str, delta: int) -> int:
        return self._run(self._counter_add, key, delta)

    def _counter_add(self, fired, key, delta):
        entry = self._get(key, COUNTER, create=True)
        value = entry.value + delta
        if not INT64_MIN <= value <= INT64_MAX:
            raise StoreError("counter overflow")
        entry.value = value
        return value

    # ------------------------------------------------------------------- keys

    def key_delete(self, key: str) -> bool:
        return self._run(self._key_delete, key)

    def _key_delete(self, fired, key):
        self._ghosts.pop(key, None)
        self._ttl_keys.discard(key)
        if self._live(key) is None:
            return False
        del self._data[key]
        return True

    def key_expire(self, key: str, ttl: float) -> None:
        """Arm the key's deadline ``ttl`` seconds from now.

        On an absent key the policy is remembered and applied when the key is
        created before that deadline.
        """
        return self._run(self._key_expire, key, ttl)

    def _key_expire(self, fired, key, ttl):
        ttl_ms = max(int(round(ttl * 1000.0)), 0)
        deadline = self._clock() + ttl_ms
        entry = self._live(key)
        if entry is None:
            self._ghosts[key] = (ttl_ms, deadline)
        else:
            entry.ttl_ms = ttl_ms
            entry.deadline = deadline
        self._ttl_keys.add(key)

    def key_exists(self, key: str) -> bool:
        return self._run(self._key_exists, key)

    def _key_exists(self, fired, key):
        entry = self._live(key)
        if entry is not None:
            self._rearm(entry)
        return entry is not None

    def ping(self) -> bytes:
        return b"PONG"

    def _ping(self, fired):
        return b"PONG"

    # ------------------------------------------------------------ extensions

    def batch(self, calls):
        """Apply ``[(command_name, args), ...]`` atomically and return the results.

        Only non-blocking commands are allowed (a pop needs timeout 0). Every
        command is applied; the first failure is raised afterwards.
        """
        fired, results, error = [], [], None
        try:
            with self._lock:
                for name, args in calls:
                    try:
                        results.append(self._impl(name)(fired, *args))
                    except (StoreError, Timeout) as exc:
                        error = error or exc
                        results.append(exc)
        finally:
            self._fire(fired)
        if error is not None:
            raise error
        return results

    def _impl(self, name):
        if name == "pop_head_blocking":
            return self._pop_now
        if name not in BATCHABLE:
            raise StoreError(f"unknown command: {name}")
        return getattr(self, "_" + name)

    def _run(self, fn, *args):
        fired = []
        try:
            with self._lock:
                return fn(fired, *args)
        finally:
            self._fire(fired)

    @staticmethod
    def _fire(fired):
        for callback, value in fired:
            callback(value)

    def _unpark(self, ticket):
        waiters = self._waiters.get(ticket.key)
        if waiters is not None:
            try:
                waiters.remove(ticket)
            except ValueError:
                pass
            if not waiters:
                del self._waiters[ticket.key]

    def keys(self, prefix: str = "") -> list[str]:
        """Live keys starting with ``prefix`` (introspection, not a wire command)."""
        with self._lock:
            return sorted(k for k in list(self._data) if k.startswith(prefix) and self._live(k) is not None)

    def waiter_count(self, key: str) -> int:
        with self._lock:
            return sum(1 for t in self._waiters.get(key, ()) if not t.consumed)

    def tick(self) -> None:
        """Process due waiter deadlines and run a sweep against the current clock."""
        with self._lock:
            fired = self._fire_due(self._clock())
            self._sweep(self._clock())
        for callback in fired:
            callback(None)

    def close(self) -> None:
        with self._lock:
            self._closed = True
            self._wakeup.notify()
        self._thread.join(timeout=2.0)

    # -------------------------------------------------------------- internals

    def _live(self, key: str) -> Optional[_Entry]:
        entry = self._data.get(key)
        if entry is not None and entry.deadline is not None and entry.deadline <= self._clock():
            del self._data[key]
            self._ttl_keys.discard(key)
            return None
        return entry

    def _rearm(self, entry: _Entry) -> None:
        if entry.ttl_ms is not None:
            entry.deadline = self._clock() + entry.ttl_ms

    def _get(self, key: str, kind: str, create: bool = False) -> Optional[_Entry]:
        entry = self._live(key)
        if entry is None:
            if not create:
                return None
            value = {LIST: _ByteList, HASH: dict, COUNTER: int}[kind]()
            entry = _Entry(kind, value)
            ghost = self._ghosts.pop(key, None)
            if ghost is not None and ghost[1] > self._clock():
                entry.ttl_ms = ghost[0]
            self._data[key] = entry
        elif entry.kind != kind:
            raise WrongType(f"{key!r} holds a {entry.kind}, not a {kind}")
        self._rearm(entry)
        return entry

    def _drop_empty(self, key: str, entry: _Entry) -> None:
        del self._data[key]
        if entry.ttl_ms is not None:
            self._ghosts[key] = (entry.ttl_ms, entry.deadline)

    def _fire_due(self, now: float) -> list:
        fired = []
        while self._timers and self._timers[0][0] <= now:
            _, _, ticket = heapq.heappop(self._timers)
            if ticket.consumed:
                continue
            ticket.consumed = True
            self._unpark(ticket)
            fired.append(ticket.callback)
        # Drop cancelled tickets lazily so the heap does not grow unbounded.
        if len(self._timers) > 1024 and len(self._timers) > 4 * sum(len(w) for w in self._waiters.values()):
            self._timers = [t for t in self._timers if not t[2].consumed]
            heapq.heapify(self._timers)
        return fired

    def _sweep(self, now: float) -> None:
        for key in list(self._ttl_keys):
            self._live(key)
        for key, (_, deadline) in list(self._ghosts.items()):
            if deadline <= now:
                del self._ghosts[key]
                if key not in self._data:
                    self._ttl_keys.discard(key)
        self._next_sweep = now + self._sweep_ms

    def _timer_loop(self) -> None:
        while True:
            with self._lock:
                if self._closed:
                    return
                now = self._clock()
                fired = self._fire_due(now)
                if now >= self._next_sweep:
                    self._sweep(now)
                if not fired:
                    wait_ms = self._next_sweep - now
                    if self._timers:
                        wait_ms = min(wait_ms, self._timers[0][0] - now)
                    # Bounded wait keeps a stepped test clock from stalling the loop.
                    self._wakeup.wait(timeout=min(max(wait_ms, 0.5), self._sweep_ms, 50.0) / 1000.0)
                    continue
            for callback in fired:
                try:
                    callback(None)
                except Exception:
                    logger.exception("waiter callback failed")


BATCHABLE = frozenset(
    {
        "push_tail",
        "list_len",
        "list_index_get",
        "list_index_set",
        "list_range",
        "hash_set",
        "hash_get",
        "hash_del",
        "hash_get_all",
        "counter_add",
        "key_delete",
        "key_expire",
        "key_exists",
        "ping",
    }
)
