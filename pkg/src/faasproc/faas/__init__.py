"""Compute backends that run task payloads as simulated or daemon-hosted functions."""

from .backend import Backend, DispatchEntry, Invocation, InvocationRecord
from .daemon import DaemonBackend, WorkerDaemon
from .latency import COLD, WARM, LatencyModel
from .sim import SimBackend
from .worker import WorkerEnv, worker_run

__all__ = [
    "Backend",
    "COLD",
    "DaemonBackend",
    "DispatchEntry",
    "Invocation",
    "InvocationRecord",
    "LatencyModel",
    "SimBackend",
    "WARM",
    "WorkerDaemon",
    "WorkerEnv",
    "worker_run",
]
