"""Networked worker daemons and the backend that dispatches to them.

A daemon pulls invocation envelopes from its own inbox list on the store,
runs them with :func:`worker_run` (at most ``concurrency`` at a time) and
pushes an invocation record to the reply list named in the envelope.
"""

from __future__ import annotations

import itertools
import json
import logging
import socket
import socketserver
import struct
import threading
import time
from typing import Sequence

from ..errors import BackendUnavailable, BindError, ConnectionClosed, Timeout
from ..registry import Registry, default_registry
from ..store.server import parse_address
from ..task import new_id, pack_fields, unpack_fields
from .backend import Backend, Invocation, InvocationRecord
from .latency import COLD, WARM, LatencyModel
from .worker import WorkerEnv, worker_run

logger = logging.getLogger(__name__)

DAEMONS_KEY = "faas/daemons"
_TIMES = struct.Struct(">ddd")
_POLL = 0.5


def inbox_key(daemon_id: str) -> str:
    return f"faas/daemon/{daemon_id}/inbox"


def _envelope(invocation_id: str, reply_key: str, dispatch_time: float, message: bytes) -> bytes:
    return pack_fields(invocation_id.encode(), reply_key.encode(), struct.pack(">d", dispatch_time), message)


def _reply(inv_id, dispatch, start, end, temperature, worker_id) -> bytes:
    return pack_fields(inv_id.encode(), _TIMES.pack(dispatch, start, end), temperature.encode(), worker_id.encode())


class _StatusHandler(socketserver.StreamRequestHandler):
    def handle(self):
        self.wfile.write(json.dumps(self.server.daemon.status()).encode() + b"\n")


class WorkerDaemon:
    """A worker process standing in for a FaaS runtime.

    ``bind`` opens a TCP status endpoint (one JSON line per connection) and
    doubles as the daemon id when no explicit id is given.
    """

    def __init__(self, store, registry: Registry | None = None, concurrency: int = 4, daemon_id: str | None = None,
                 blobs=None, bind: str | None = None):
        if concurrency < 1:
            raise ValueError("concurrency must be >= 1")
        self.store = store
        self.registry = registry or default_registry
        self.concurrency = concurrency
        if blobs is None:
            from ..objectfs import StoreBlobStore

            blobs = StoreBlobStore(store)
        self.blobs = blobs
        self._status_server = None
        if bind:
            try:
                self._status_server = socketserver.ThreadingTCPServer(parse_address(bind), _StatusHandler)
            except OSError as exc:
                raise BindError(f"cannot bind {bind}: {exc}") from exc
            self._status_server.daemon_threads = True
            self._status_server.daemon = self
            host, port = self._status_server.server_address[:2]
            bind = f"{host}:{port}"
        self.bind = bind
        self.daemon_id = daemon_id or bind or f"daemon-{new_id()[:8]}"
        self._slots = threading.BoundedSemaphore(concurrency)
        self._used_slots: set[int] = set()
        self._free_slots = list(range(concurrency - 1, -1, -1))
        self._slot_lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.running = 0
        self.completed = 0

    def status(self) -> dict:
        return {"id": self.daemon_id, "concurrency": self.concurrency, "running": self.running, "completed": self.completed}

    def start(self) -> "WorkerDaemon":
        self._register()
        if self._status_server is not None:
            threading.Thread(target=self._status_server.serve_forever, args=(0.05,), daemon=True).start()
        self._thread = threading.Thread(target=self._loop, name=f"daemon-{self.daemon_id}", daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.start()
        try:
            while not self._stop.wait(1.0):
                pass
        finally:
            self.stop()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None and self._thread is not threading.current_thread():
            self._thread.join(timeout=2 * _POLL + 1)
        if self._status_server is not None:
            self._status_server.shutdown()
            self._status_server.server_close()
            self._status_server = None
        try:
            self.store.hash_del(DAEMONS_KEY, self.daemon_id)
        except Exception:
            pass

    def _register(self) -> None:
        info = {"concurrency": self.concurrency, "bind": self.bind}
        self.store.hash_set(DAEMONS_KEY, self.daemon_id, json.dumps(info).encode())

    def _loop(self) -> None:
        inbox = inbox_key(self.daemon_id)
        while not self._stop.is_set():
            if not self._slots.acquire(timeout=_POLL):
                continue
            try:
                envelope = self.store.pop_head_blocking(inbox, _POLL)
            except Timeout:
                self._slots.release()
                continue
            except ConnectionClosed:
                self._slots.release()
                logger.error("daemon %s lost its store connection", self.daemon_id)
                return
            threading.Thread(target=self._execute, args=(envelope,), daemon=True).start()

    def _execute(self, envelope: bytes) -> None:
        inv_id, reply_key, dispatch, message = unpack_fields(envelope)
        (dispatch_time,) = struct.unpack(">d", dispatch)
        with self._slot_lock:
            slot = self._free_slots.pop()
            temperature = WARM if slot in self._used_slots else COLD
            self._used_slots.add(slot)
            self.running += 1
        worker_id = f"{self.daemon_id}/{slot}"
        start = time.time()
        try:
            worker_run(message, WorkerEnv(self.store, self.blobs, self.registry, worker_id=worker_id))
        except Exception:
            logger.exception("daemon %s: invocation %s crashed", self.daemon_id, inv_id.decode())
        end = time.time()
        with self._slot_lock:
            self._free_slots.append(slot)
            self.running -= 1
            self.completed += 1
        try:
            self.store.push_tail(reply_key.decode(), _reply(inv_id.decode(), dispatch_time, start, end, temperature, worker_id))
        except Exception:
            logger.exception("daemon %s: cannot report invocation", self.daemon_id)
        finally:
            self._slots.release()


class DaemonBackend(Backend):
    """Dispatches invocations round-robin to registered worker daemons."""

    name = "daemons"

    def __init__(self, store, daemons: Sequence[str] | None = None, latency: LatencyModel | None = None):
        super().__init__()
        self.store = store
        self.latency = latency or LatencyModel.zero()
        self.daemons = list(daemons) if daemons else sorted(store.hash_get_all(DAEMONS_KEY))
        if not self.daemons:
            raise BackendUnavailable("no worker daemons registered with the store")
        self._rr = itertools.cycle(self.daemons)
        self._reply_key = f"faas/backend/{new_id()}/done"
        self._pending: dict[str, Invocation] = {}
        self._lock = threading.Lock()
        self._dispatch_lock = threading.Lock()
        self._collector = threading.Thread(target=self._collect, name="daemon-backend", daemon=True)
        self._collector.start()

    def invoke(self, messages: Sequence[bytes], labels: Sequence | None = None) -> list[Invocation]:
        if self.closed:
            raise BackendUnavailable("daemon backend is closed")
        labels = list(labels) if labels is not None else [None] * len(messages)
        issued = []
        with self._dispatch_lock:
            t0 = time.monotonic()
            for i, (message, label) in enumerate(zip(messages, labels)):
                if self.latency.dispatch_cost:
                    wait = t0 + i * self.latency.dispatch_cost - time.monotonic()
                    if wait > 0:
                        time.sleep(wait)
                inv = Invocation(new_id(), label, time.time())
                with self._lock:
                    self._pending[inv.invocation_id] = inv
                self._book(inv)
                self.store.push_tail(inbox_key(next(self._rr)), _envelope(inv.invocation_id, self._reply_key, inv.dispatch_time, message))
                issued.append(inv)
        return issued

    def _collect(self) -> None:
        while not self.closed:
            try:
                data = self.store.pop_head_blocking(self._reply_key, _POLL)
            except Timeout:
                continue
            except Exception:
                if not self.closed:
                    logger.exception("daemon backend collector stopped")
                return
            inv_id, times, temperature, worker_id = unpack_fields(data)
            dispatch, start, end = _TIMES.unpack(times)
            with self._lock:
                inv = self._pending.pop(inv_id.decode(), None)
            if inv is not None:
                inv._complete(InvocationRecord(inv.invocation_id, dispatch, start, end, temperature.decode(), worker_id.decode(), label=inv.label))

    def close(self) -> None:
        super().close()
        self._collector.join(timeout=2 * _POLL + 1)
