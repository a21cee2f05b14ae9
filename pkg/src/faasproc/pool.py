"""Process and Pool with the multiprocessing interface, running on a backend.

A :class:`Process` is one function invocation. A :class:`Pool` starts its
workers once; they stay alive popping task descriptors from a shared job
queue in the store until each consumes one termination sentinel.
"""

from __future__ import annotations

import os
import threading
import time
from concurrent.futures import Future
from concurrent.futures import TimeoutError as FutureTimeout
from typing import Callable, Iterable

from . import context
from .errors import JoinTimeout, PoolClosed, TaskFailed
from .orchestrator import RUNNING, JobManifest, Orchestrator
from .registry import Registry, default_registry, function_name
from .task import PoolWorkerSpec, dumps_args, new_id, pool_worker_message, queue_sentinel, queue_task

OPEN, CLOSED, TERMINATED = "open", "closed", "terminated"


def _defaults(backend, store, blobs):
    if backend is None:
        backend = context.current_backend()
    if store is None:
        store = getattr(backend, "store", None) or context.current_store()
    if blobs is None:
        blobs = getattr(backend, "blobs", None) or context.current_blobs()
    return backend, store, blobs


class Process:
    """Runs ``target(*args, **kwargs)`` as one function invocation.

    Unlike ``multiprocessing``, :meth:`join` hands back the target's return
    value and raises :class:`TaskFailed` if it raised.
    """

    def __init__(self, group=None, target=None, name=None, args=(), kwargs=None, *, daemon=None,
                 backend=None, store=None, blobs=None, poll_interval: float = 0.05):
        if target is None:
            raise ValueError("Process needs a registered target function")
        self.target = target
        self.name = name or f"Process-{new_id()[:8]}"
        self.args = tuple(args)
        self.kwargs = dict(kwargs or {})
        self.daemon = daemon
        self._backend, self._store, self._blobs = backend, store, blobs
        self._poll = poll_interval
        self._orch: Orchestrator | None = None
        self._manifest: JobManifest | None = None
        self.exitcode: int | None = None
        self.result = None

    def start(self) -> None:
        if self._manifest is not None:
            raise RuntimeError("processes can only be started once")
        backend, store, blobs = _defaults(self._backend, self._store, self._blobs)
        self._orch = Orchestrator(store, backend, blobs, poll_interval=self._poll)
        self._manifest = self._orch.submit_job([(self.target, self.args, self.kwargs)])

    @property
    def invocation(self):
        return self._manifest.invocations[0] if self._manifest and self._manifest.invocations else None

    def join(self, timeout: float | None = None):
        if self._manifest is None:
            raise RuntimeError("can only join a started process")
        try:
            (self.result,) = self._orch.join(self._manifest, timeout=timeout)
        except TaskFailed:
            self.exitcode = 1
            raise
        self.exitcode = 0
        return self.result

    def is_alive(self) -> bool:
        if self._manifest is None or self.exitcode is not None:
            return False
        return not all(inv.done() for inv in self._manifest.invocations)

    def run(self):
        """Call the target in this process, as ``multiprocessing`` does."""
        fn = default_registry.get(function_name(self.target))
        return fn(*self.args, **self.kwargs)

    def __repr__(self):
        return f"<Process {self.name} exitcode={self.exitcode}>"


class AsyncResult:
    """Result of an asynchronous pool call, resolved once every task reports."""

    def __init__(self, pool: "Pool", manifest: JobManifest, unpack: Callable[[list], object],
                 callback=None, error_callback=None):
        self._pool = pool
        self.manifest = manifest
        self._future: Future = Future()
        self._callback, self._error_callback = callback, error_callback
        self._unpack = unpack

    def _start(self) -> None:
        if not self.manifest.tasks:
            self._finish(lambda: self._unpack([]))
        else:
            threading.Thread(target=self._finish, args=(self._join,), daemon=True).start()

    def _join(self):
        return self._unpack(self._pool._orch.join(self.manifest, drain=True))

    def _finish(self, produce):
        try:
            value = produce()
        except BaseException as exc:  # noqa: BLE001 - handed to the waiter
            self._future.set_exception(exc)
            if self._error_callback is not None:
                self._error_callback(exc)
        else:
            self._future.set_result(value)
            if self._callback is not None:
                self._callback(value)
        finally:
            self._pool._forget(self)

    def get(self, timeout: float | None = None):
        try:
            return self._future.result(timeout)
        except FutureTimeout:
            if self._future.done():
                raise
            raise JoinTimeout(f"result not ready within {timeout}s") from None

    def wait(self, timeout: float | None = None) -> None:
        try:
            self._future.exception(timeout)
        except FutureTimeout:
            pass

    def ready(self) -> bool:
        return self._future.done()

    def successful(self) -> bool:
        if not self.ready():
            raise ValueError("result is not ready")
        return self._future.exception() is None


class Pool:
    """A fixed set of long-lived workers fed through a job queue in the store.

    Exactly ``processes`` invocations are made over the pool's lifetime,
    however many tasks are submitted. Functions and the initializer must be
    registered (see :mod:`faasproc.registry`).
    """

    def __init__(self, processes: int | None = None, initializer=None, initargs=(), maxtasksperchild=None, *,
                 backend=None, store=None, blobs=None, poll_interval: float = 0.05, chunksize: int | None = None,
                 registry: Registry | None = None):
        if processes is None:
            processes = os.cpu_count() or 1
        if processes < 1:
            raise ValueError("Number of processes must be at least 1")
        self.size = processes
        self.backend, self.store, self.blobs = _defaults(backend, store, blobs)
        self.registry = registry or default_registry
        self.chunksize = chunksize
        self._orch = Orchestrator(self.store, self.backend, self.blobs, poll_interval=poll_interval, registry=self.registry)
        self.pool_id = new_id()
        self.queue_key = f"pool/{self.pool_id}/jobs"
        self.exits_key = f"pool/{self.pool_id}/exits"
        init_name = ""
        if initializer is not None:
            init_name = function_name(initializer)
            self.registry.get(init_name)
        # Pickled once per worker: each copy carries its own reference to any
        # shared resource in initargs, and each worker releases its own.
        specs = [
            PoolWorkerSpec(self.pool_id, self.queue_key, self.exits_key, init_name, dumps_args(initargs))
            for _ in range(processes)
        ]
        self.phase = OPEN
        self.sentinels_consumed: int | None = None
        self._lock = threading.Lock()
        self._outstanding: set[AsyncResult] = set()
        self._idle = threading.Condition(self._lock)
        self.workers = self.backend.invoke(
            [pool_worker_message(spec) for spec in specs], labels=[f"{self.pool_id[:8]}/worker-{i}" for i in range(processes)]
        )

    @property
    def invocation_count(self) -> int:
        return len(self.workers)

    # ----------------------------------------------------------- submit

    def _submit(self, fn, calls: list[tuple], chunksize, unpack, callback=None, error_callback=None) -> AsyncResult:
        if self.phase != OPEN:
            raise PoolClosed("Pool not running")
        chunksize = chunksize or self.chunksize
        name = function_name(fn)
        if chunksize and chunksize > 1:
            chunks = [calls[i : i + chunksize] for i in range(0, len(calls), chunksize)]
            manifest = self._orch.prepare([(name, chunk) for chunk in chunks], chunked=True)
            inner = unpack

            def unpack(results):  # noqa: F811 - flatten chunk results first
                return inner([value for chunk in results for value in chunk])
        else:
            manifest = self._orch.prepare([(name, args, kwargs) for args, kwargs in calls])
        with self._lock:
            if self.phase != OPEN:
                raise PoolClosed("Pool not running")
            if manifest.tasks:
                now = time.time()
                for state in manifest._states:
                    state.dispatch_time = now
                # All of a job's tasks go onto the queue in one push.
                self.store.push_tail(self.queue_key, *[queue_task(d) for d in manifest.tasks])
                manifest.advance(RUNNING)
            result = AsyncResult(self, manifest, unpack, callback, error_callback)
            self._outstanding.add(result)
        result._start()
        return result

    def _forget(self, result: AsyncResult) -> None:
        with self._lock:
            self._outstanding.discard(result)
            self._idle.notify_all()

    def map_async(self, func, iterable: Iterable, chunksize=None, callback=None, error_callback=None) -> AsyncResult:
        calls = [((item,), {}) for item in iterable]
        return self._submit(func, calls, chunksize, list, callback, error_callback)

    def map(self, func, iterable: Iterable, chunksize=None) -> list:
        return self.map_async(func, iterable, chunksize).get()

    def starmap_async(self, func, iterable: Iterable, chunksize=None, callback=None, error_callback=None) -> AsyncResult:
        calls = [(tuple(args), {}) for args in iterable]
        return self._submit(func, calls, chunksize, list, callback, error_callback)

    def starmap(self, func, iterable: Iterable, chunksize=None) -> list:
        return self.starmap_async(func, iterable, chunksize).get()

    def apply_async(self, func, args=(), kwds=None, callback=None, error_callback=None) -> AsyncResult:
        return self._submit(func, [(tuple(args), dict(kwds or {}))], None, lambda r: r[0], callback, error_callback)

    def apply(self, func, args=(), kwds=None):
        return self.apply_async(func, args, kwds).get()

    def imap(self, func, iterable: Iterable, chunksize=None):
        return iter(self.map(func, iterable, chunksize))

    def imap_unordered(self, func, iterable: Iterable, chunksize=None):
        return self.imap(func, iterable, chunksize)

    # --------------------------------------------------------- shutdown

    def close(self) -> None:
        with self._lock:
            if self.phase == OPEN:
                self.phase = CLOSED

    def join(self, timeout: float | None = None) -> None:
        """Wait for submitted work to finish, then stop the workers."""
        with self._lock:
            if self.phase == OPEN:
                raise ValueError("Pool is still running")
            if self.phase == CLOSED:
                deadline = None if timeout is None else time.monotonic() + timeout
                while self._outstanding:
                    remaining = None if deadline is None else deadline - time.monotonic()
                    if remaining is not None and remaining <= 0:
                        raise JoinTimeout("pool work still outstanding")
                    self._idle.wait(remaining)
        self._shutdown(drop_queue=False, timeout=timeout)

    def terminate(self, timeout: float | None = 30.0) -> None:
        """Stop the workers now, discarding queued tasks. Idempotent."""
        self._shutdown(drop_queue=True, timeout=timeout)

    def _shutdown(self, drop_queue: bool, timeout: float | None) -> None:
        with self._lock:
            if self.phase == TERMINATED:
                return
            self.phase = TERMINATED
            outstanding = list(self._outstanding)
        for result in outstanding:
            result.manifest.cancel(PoolClosed("pool terminated"))
        calls = [("key_delete", (self.queue_key,))] if drop_queue else []
        calls.append(("push_tail", (self.queue_key, *[queue_sentinel(self.pool_id)] * self.size)))
        self.store.batch(calls)
        deadline = None if timeout is None else time.monotonic() + timeout
        for inv in self.workers:
            remaining = None if deadline is None else max(0.0, deadline - time.monotonic())
            try:
                inv.record(remaining)
            except Exception:
                pass
        self.sentinels_consumed = self.store.counter_add(self.exits_key, 0)
        self.store.batch([("key_delete", (self.queue_key,)), ("key_delete", (self.exits_key,))])

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.terminate()

    def __repr__(self):
        return f"<Pool {self.pool_id[:8]} size={self.size} {self.phase}>"
