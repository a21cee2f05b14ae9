"""Locks, semaphores, conditions, barriers and events over store lists.

A semaphore is a list of tokens: acquiring blocking-pops one, releasing
pushes one back. A condition keeps a registry list naming one notification
list per waiter; notifying pushes a token onto the chosen waiters' lists.
"""

from __future__ import annotations

import struct
import threading
import time
import uuid as _uuid

from ..errors import BrokenBarrierError, LockNotHeld, Timeout
from .base import BARRIER, CONDITION, DEFAULT_TTL, EVENT, LOCK, SEMAPHORE, Resource, pack_blob, unpack_blob

TOKEN = b"\x01"


def _lock_timeout(block: bool, timeout: float | None) -> float | None:
    if not block:
        return 0.0
    if timeout is None or timeout < 0:
        return None
    return timeout


class _TokenLock:
    """Mutual exclusion on one token list, remembering the owning thread."""

    def __init__(self, res: Resource, key: str):
        self._res = res
        self.key = key
        self._owner: int | None = None

    def acquire(self, block: bool = True, timeout: float | None = None) -> bool:
        self._res._touch()
        try:
            self._res.store.pop_head_blocking(self.key, _lock_timeout(block, timeout))
        except Timeout:
            return False
        self._owner = threading.get_ident()
        return True

    def held(self) -> bool:
        return self._owner == threading.get_ident()

    def release_calls(self) -> list:
        """Batch commands releasing the lock; ownership is given up locally now."""
        if not self.held():
            raise LockNotHeld("lock released by a thread that does not hold it")
        self._owner = None
        return [("push_tail", (self.key, TOKEN))]

    def release(self) -> None:
        (call,) = self.release_calls()
        self._res.store.push_tail(*call[1])

    def locked(self) -> bool:
        return self._res.store.list_len(self.key) == 0


class _Notifier:
    """Condition-variable core: registry list plus per-waiter lists.

    Registry updates happen only while the associated lock is held, so the
    registry never races with itself.
    """

    def __init__(self, res: Resource, lock: _TokenLock, registry_key: str):
        self._res = res
        self.lock = lock
        self.registry = registry_key

    def _waiter_key(self) -> str:
        return self._res.key("w/" + _uuid.uuid4().hex)

    def wait(self, timeout: float | None = None) -> bool:
        if not self.lock.held():
            raise LockNotHeld("wait() requires holding the condition's lock")
        store = self._res.store
        wkey = self._waiter_key()
        # Register and release the lock in one step.
        store.batch([("push_tail", (self.registry, wkey.encode())), *self.lock.release_calls()])
        woke = True
        try:
            store.pop_head_blocking(wkey, timeout)
        except Timeout:
            woke = False
        finally:
            self.lock.acquire()
        if not woke:
            waiting = store.list_range(self.registry, 0, -1)
            if wkey.encode() in waiting:
                rest = [w for w in waiting if w != wkey.encode()]
                self._rewrite(rest)
            else:
                # A notifier picked us after the deadline; its token is already there.
                store.pop_head_blocking(wkey, 0)
                woke = True
        return woke

    def _rewrite(self, entries: list[bytes]) -> None:
        calls = [("key_delete", (self.registry,)), ("key_expire", (self.registry, self._res.ttl))]
        if entries:
            calls.append(("push_tail", (self.registry, *entries)))
        self._res.store.batch(calls)

    def notify(self, n: int = 1) -> int:
        if not self.lock.held():
            raise LockNotHeld("notify() requires holding the condition's lock")
        if n <= 0:
            return 0
        store = self._res.store
        chosen = store.list_range(self.registry, 0, n - 1)
        if chosen:
            store.batch([("pop_head_blocking", (self.registry, 0))] * len(chosen) + self._token_calls(chosen))
        return len(chosen)

    def notify_all(self) -> int:
        if not self.lock.held():
            raise LockNotHeld("notify_all() requires holding the condition's lock")
        chosen = self._res.store.list_range(self.registry, 0, -1)
        if chosen:
            self._res.store.batch(
                [("key_delete", (self.registry,)), ("key_expire", (self.registry, self._res.ttl)), *self._token_calls(chosen)]
            )
        return len(chosen)

    def _token_calls(self, waiters: list[bytes]) -> list:
        calls = []
        for w in waiters:
            key = w.decode()
            calls += [("key_expire", (key, self._res.ttl)), ("push_tail", (key, TOKEN))]
        return calls

    def waiting(self) -> int:
        return self._res.store.list_len(self.registry)


class Semaphore(Resource):
    kind = SEMAPHORE
    key_names = ("tokens",)

    def __init__(self, value: int = 1, *, store=None, ttl: int = DEFAULT_TTL):
        if value < 0:
            raise ValueError("semaphore initial value must be >= 0")
        self.initial = value
        self._create(store, ttl, lambda: [("push_tail", (self.key("tokens"), *[TOKEN] * value))] if value else [])

    def _fields(self) -> bytes:
        return struct.pack(">I", self.initial)

    def _load_fields(self, data: bytes) -> None:
        (self.initial,) = struct.unpack(">I", data[:4])

    def acquire(self, block: bool = True, timeout: float | None = None) -> bool:
        """Take a token; returns False if none became free within ``timeout``."""
        self._touch()
        try:
            self._store.pop_head_blocking(self.key("tokens"), _lock_timeout(block, timeout))
        except Timeout:
            return False
        return True

    def release(self, n: int = 1) -> None:
        self._touch()
        if n < 1:
            raise ValueError("n must be >= 1")
        self._store.push_tail(self.key("tokens"), *[TOKEN] * n)

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, *exc):
        self.release()


class Lock(Resource):
    """A non-reentrant lock: a semaphore with a single token."""

    kind = LOCK
    key_names = ("tokens",)

    def __init__(self, *, store=None, ttl: int = DEFAULT_TTL):
        self._create(store, ttl, lambda: [("push_tail", (self.key("tokens"), TOKEN))])
        self._core = _TokenLock(self, self.key("tokens"))

    def _load_fields(self, data: bytes) -> None:
        self._core = _TokenLock(self, self.key("tokens"))

    def acquire(self, block: bool = True, timeout: float | None = None) -> bool:
        return self._core.acquire(block, timeout)

    def release(self) -> None:
        self._touch()
        self._core.release()

    def locked(self) -> bool:
        return self._core.locked()

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, *exc):
        self.release()


class Condition(Resource):
    """Condition variable; ``wait`` releases the lock and reacquires it before returning."""

    kind = CONDITION

    def __init__(self, lock: Lock | None = None, *, store=None, ttl: int = DEFAULT_TTL):
        if lock is not None and not isinstance(lock, Lock):
            raise TypeError("Condition needs a faasproc Lock")
        self._ext = lock.clone() if lock is not None else None
        self.key_names = ("waiters",) if lock is not None else ("waiters", "lock")
        if store is None and lock is not None:
            store = lock.store
        self._create(store, ttl, None if lock is not None else lambda: [("push_tail", (self.key("lock"), TOKEN))])
        self._setup()

    def _setup(self) -> None:
        core = self._ext._core if self._ext is not None else _TokenLock(self, self.key("lock"))
        self._notifier = _Notifier(self, core, self.key("waiters"))

    def _fields(self) -> bytes:
        if self._ext is None:
            return b"\x00"
        return b"\x01" + pack_blob(self._ext.to_bytes())

    def _load_fields(self, data: bytes) -> None:
        if data[:1] == b"\x01":
            raw, _ = unpack_blob(data, 1)
            self._ext = Resource.from_bytes(raw, self._store)
            self.key_names = ("waiters",)
        else:
            self._ext = None
            self.key_names = ("waiters", "lock")
        self._setup()

    def _children(self) -> list[Resource]:
        return [self._ext] if self._ext is not None else []

    def acquire(self, block: bool = True, timeout: float | None = None) -> bool:
        return self._notifier.lock.acquire(block, timeout)

    def release(self) -> None:
        self._touch()
        self._notifier.lock.release()

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, *exc):
        self.release()

    def wait(self, timeout: float | None = None) -> bool:
        """Wait for a notification; False if ``timeout`` elapsed first."""
        self._touch()
        return self._notifier.wait(timeout)

    def wait_for(self, predicate, timeout: float | None = None):
        deadline = None if timeout is None else time.monotonic() + timeout
        result = predicate()
        while not result:
            remaining = None if deadline is None else deadline - time.monotonic()
            if remaining is not None and remaining <= 0:
                break
            self.wait(remaining)
            result = predicate()
        return result

    def notify(self, n: int = 1) -> int:
        """Wake the ``n`` longest-waiting threads; returns how many were woken."""
        self._touch()
        return self._notifier.notify(n)

    def notify_all(self) -> int:
        self._touch()
        return self._notifier.notify_all()


class Barrier(Resource):
    """Reusable barrier for ``parties`` participants.

    ``wait`` returns the arrival index within the current generation. If a
    participant times out the barrier breaks and every current and later
    waiter gets :class:`BrokenBarrierError` until :meth:`reset`.
    """

    kind = BARRIER
    key_names = ("count", "generation", "broken", "lock", "waiters")

    def __init__(self, parties: int, action=None, timeout: float | None = None, *, store=None, ttl: int = DEFAULT_TTL):
        if parties < 1:
            raise ValueError("parties must be >= 1")
        self.parties = parties
        self.timeout = timeout
        self._action = action
        self._create(store, ttl, lambda: [("push_tail", (self.key("lock"), TOKEN))])
        self._setup()

    def _setup(self) -> None:
        self._lock = _TokenLock(self, self.key("lock"))
        self._cond = _Notifier(self, self._lock, self.key("waiters"))
        self.last_generation: int | None = None

    def _fields(self) -> bytes:
        return struct.pack(">I", self.parties) + (struct.pack(">d", self.timeout) if self.timeout is not None else b"")

    def _load_fields(self, data: bytes) -> None:
        (self.parties,) = struct.unpack(">I", data[:4])
        self.timeout = struct.unpack(">d", data[4:12])[0] if len(data) >= 12 else None
        self._action = None
        self._setup()

    def _state(self) -> tuple[int, int]:
        gen, broken = self._store.batch(
            [("counter_add", (self.key("generation"), 0)), ("counter_add", (self.key("broken"), 0))]
        )
        return gen, broken

    def wait(self, timeout: float | None = None) -> int:
        self._touch()
        timeout = self.timeout if timeout is None else timeout
        deadline = None if timeout is None else time.monotonic() + timeout
        self._lock.acquire()
        try:
            gen, broken = self._state()
            if broken:
                raise BrokenBarrierError()
            index = self._store.counter_add(self.key("count"), 1) - 1
            if index == self.parties - 1:
                if self._action is not None:
                    try:
                        self._action()
                    except BaseException:
                        self._break()
                        raise
                self._store.batch(
                    [("counter_add", (self.key("count"), -self.parties)), ("counter_add", (self.key("generation"), 1))]
                )
                self._cond.notify_all()
                self.last_generation = gen + 1
                return index
            while True:
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    self._break()
                    raise BrokenBarrierError()
                self._cond.wait(remaining)
                now_gen, broken = self._state()
                if now_gen != gen:
                    self.last_generation = gen + 1
                    return index
                if broken:
                    raise BrokenBarrierError()
        finally:
            self._lock.release()

    def _break(self) -> None:
        self._store.batch([("key_delete", (self.key("broken"),)), ("key_expire", (self.key("broken"), self.ttl)),
                           ("counter_add", (self.key("broken"), 1))])
        self._cond.notify_all()

    def abort(self) -> None:
        self._touch()
        with _held(self._lock):
            self._break()

    def reset(self) -> None:
        """Return a broken (or idle) barrier to its initial state.

        Parties still parked are woken and get :class:`BrokenBarrierError`.
        """
        self._touch()
        with _held(self._lock):
            if self._cond.waiting():
                self._break()
            calls = []
            for name in ("broken", "count"):
                calls += [("key_delete", (self.key(name),)), ("key_expire", (self.key(name), self.ttl))]
            self._store.batch(calls)

    @property
    def n_waiting(self) -> int:
        return self._store.counter_add(self.key("count"), 0)

    @property
    def broken(self) -> bool:
        return bool(self._state()[1])

    def generation(self) -> int:
        return self._state()[0]


class Event(Resource):
    kind = EVENT
    key_names = ("flag", "lock", "waiters")

    def __init__(self, *, store=None, ttl: int = DEFAULT_TTL):
        self._create(store, ttl, lambda: [("push_tail", (self.key("lock"), TOKEN))])
        self._setup()

    def _setup(self) -> None:
        self._lock = _TokenLock(self, self.key("lock"))
        self._cond = _Notifier(self, self._lock, self.key("waiters"))

    def _load_fields(self, data: bytes) -> None:
        self._setup()

    def is_set(self) -> bool:
        self._touch()
        return self._store.counter_add(self.key("flag"), 0) > 0

    def _flag_calls(self, value: int) -> list:
        calls = [("key_delete", (self.key("flag"),)), ("key_expire", (self.key("flag"), self.ttl))]
        if value:
            calls.append(("counter_add", (self.key("flag"), value)))
        return calls

    def set(self) -> None:
        self._touch()
        with _held(self._lock):
            self._store.batch(self._flag_calls(1))
            self._cond.notify_all()

    def clear(self) -> None:
        self._touch()
        with _held(self._lock):
            self._store.batch(self._flag_calls(0))

    def wait(self, timeout: float | None = None) -> bool:
        if self.is_set():
            return True
        with _held(self._lock):
            if self._store.counter_add(self.key("flag"), 0) > 0:
                return True
            self._cond.wait(timeout)
            return self._store.counter_add(self.key("flag"), 0) > 0


class _held:
    def __init__(self, lock: _TokenLock):
        self.lock = lock

    def __enter__(self):
        self.lock.acquire()

    def __exit__(self, *exc):
        self.lock.release()
