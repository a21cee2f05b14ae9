"""In-process function simulator with cold/warm startup latency injection."""

from __future__ import annotations

import itertools
import logging
import random
import threading
import time
from typing import Sequence

from .. import context
from ..errors import BackendUnavailable
from ..registry import Registry, default_registry
from ..task import new_id
from .backend import Backend, Invocation, InvocationRecord
from .latency import COLD, WARM, LatencyModel
from .worker import WorkerEnv, worker_run

logger = logging.getLogger(__name__)


class SimBackend(Backend):
    """Runs each invocation on its own thread after a sampled startup delay.

    Worker slots model containers: an invocation reuses an idle slot (warm)
    unless none is left or it has been idle longer than ``latency.eviction``,
    in which case a new slot is created (cold). Invocations of one batch are
    dispatched sequentially, ``latency.dispatch_cost`` apart. Workers talk to
    the orchestrator only through ``store`` and ``blobs``.
    """

    name = "sim"

    def __init__(self, store=None, blobs=None, latency: LatencyModel | None = None, registry: Registry | None = None):
        super().__init__()
        self.store = store if store is not None else context.current_store()
        if blobs is None:
            from ..objectfs import StoreBlobStore

            blobs = StoreBlobStore(self.store)
        self.blobs = blobs
        self.latency = latency or LatencyModel.zero()
        self.registry = registry or default_registry
        self._rng = random.Random(self.latency.seed)
        self._dispatch_lock = threading.Lock()
        self._slot_lock = threading.Lock()
        self._idle: list[tuple[str, float]] = []
        self._slot_ids = itertools.count()
        self._active = 0
        self.peak_active = 0

    def prewarm(self, n: int) -> None:
        """Add ``n`` idle warm slots, as if earlier invocations had run."""
        now = time.monotonic()
        with self._slot_lock:
            for _ in range(n):
                self._idle.append((f"sim-{next(self._slot_ids)}", now))

    def _lease(self) -> tuple[str, str]:
        now = time.monotonic()
        with self._slot_lock:
            while self._idle:
                slot, idle_since = self._idle.pop()
                if now - idle_since <= self.latency.eviction:
                    return slot, WARM
            return f"sim-{next(self._slot_ids)}", COLD

    def _release(self, slot: str) -> None:
        with self._slot_lock:
            self._idle.append((slot, time.monotonic()))

    def invoke(self, messages: Sequence[bytes], labels: Sequence | None = None) -> list[Invocation]:
        if self.closed:
            raise BackendUnavailable("simulator backend is closed")
        labels = list(labels) if labels is not None else [None] * len(messages)
        issued = []
        with self._dispatch_lock:
            t0 = time.monotonic()
            for i, (message, label) in enumerate(zip(messages, labels)):
                if self.latency.dispatch_cost:
                    wait = t0 + i * self.latency.dispatch_cost - time.monotonic()
                    if wait > 0:
                        time.sleep(wait)
                slot, temperature = self._lease()
                delay = self.latency.startup(self._rng, temperature)
                inv = Invocation(new_id(), label, time.time())
                self._book(inv)
                threading.Thread(
                    target=self._run,
                    args=(inv, message, slot, temperature, delay),
                    name=f"sim-worker-{slot}",
                    daemon=True,
                ).start()
                issued.append(inv)
        return issued

    def _run(self, inv: Invocation, message: bytes, slot: str, temperature: str, delay: float) -> None:
        if delay:
            time.sleep(max(0.0, inv.dispatch_time + delay - time.time()))
        start = time.time()
        with self._slot_lock:
            self._active += 1
            self.peak_active = max(self.peak_active, self._active)
        env = WorkerEnv(
            store=self.store,
            blobs=self.blobs,
            registry=self.registry,
            worker_id=slot,
            setup_delay=self.latency.setup(temperature),
            result_delay=self.latency.result_delay,
            max_execution=self.latency.max_execution,
        )
        try:
            worker_run(message, env)
        except Exception as exc:
            logger.exception("invocation %s crashed", inv.invocation_id)
            inv._fail(exc)
        finally:
            end = time.time()
            with self._slot_lock:
                self._active -= 1
            self._release(slot)
        inv._complete(InvocationRecord(inv.invocation_id, inv.dispatch_time, start, end, temperature, slot, delay, inv.label))
