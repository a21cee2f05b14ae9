"""multiprocessing-style parallelism over function invocations and a shared store.

Processes and pools run as (simulated or daemon-hosted) function
invocations; pipes, queues, locks and the rest keep their state in the
store, so code written against ``multiprocessing`` runs with few changes.
"""

from . import context
from .context import configure
from .errors import (
    BrokenBarrierError,
    DroppedResource,
    Empty,
    FaasprocError,
    Full,
    JoinTimeout,
    LockNotHeld,
    PoolClosed,
    TaskFailed,
    Timeout,
    UnknownFunction,
)
from .faas import COLD, WARM, DaemonBackend, LatencyModel, SimBackend, WorkerDaemon
from .ipc import Array, Barrier, Condition, Event, Lock, Manager, Pipe, Queue, Semaphore, Value
from .objectfs import ObjectFS, open
from .orchestrator import Orchestrator
from .pool import AsyncResult, Pool, Process
from .registry import register, register_class
from .store import StoreEngine, connect, serve


def cpu_count() -> int:
    import os

    return os.cpu_count() or 1


__all__ = [
    "Array",
    "AsyncResult",
    "Barrier",
    "BrokenBarrierError",
    "COLD",
    "Condition",
    "DaemonBackend",
    "DroppedResource",
    "Empty",
    "Event",
    "FaasprocError",
    "Full",
    "JoinTimeout",
    "LatencyModel",
    "Lock",
    "LockNotHeld",
    "Manager",
    "ObjectFS",
    "Orchestrator",
    "Pipe",
    "Pool",
    "PoolClosed",
    "Process",
    "Queue",
    "Semaphore",
    "SimBackend",
    "StoreEngine",
    "TaskFailed",
    "Timeout",
    "UnknownFunction",
    "Value",
    "WARM",
    "WorkerDaemon",
    "configure",
    "connect",
    "context",
    "cpu_count",
    "open",
    "register",
    "register_class",
    "serve",
]
