"""Store/backend wiring shared by the benchmarks."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import BackendUnavailable
from ..faas import DaemonBackend, LatencyModel, SimBackend, WorkerDaemon
from ..objectfs import StoreBlobStore
from ..store import EMBEDDED, StoreEngine, connect


@dataclass
class BenchEnv:
    """A store, blob layer and backend for one benchmark run."""

    store: object
    backend: object
    blobs: object
    backend_kind: str = "sim"
    store_addr: str = EMBEDDED
    _owned: list = field(default_factory=list)

    def close(self) -> None:
        for thing in reversed(self._owned):
            try:
                (getattr(thing, "stop", None) or thing.close)()
            except Exception:
                pass
        self._owned.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def config(self) -> dict:
        return {"backend": self.backend_kind, "store": self.store_addr}


def make_env(backend: str = "sim", store: str | object = EMBEDDED, latency: LatencyModel | None = None,
             workers: int = 8, wrap_store=None, blobs=None) -> BenchEnv:
    """Build an environment.

    ``store`` is an address (``"embedded"`` or ``host:port``) or a store
    object. ``wrap_store`` lets a benchmark interpose a proxy such as a
    counting or throttled store between every party and the store. With
    ``backend="daemons"`` on an embedded store, in-process worker daemons
    with ``workers`` slots in total are started; on a networked store the
    daemons already registered there are used.
    """
    owned: list = []
    if isinstance(store, str):
        addr = store
        base = connect(store)
        if not isinstance(base, StoreEngine):
            owned.append(base)
    else:
        addr, base = type(store).__name__, store
    st = wrap_store(base) if wrap_store is not None else base
    blobs = blobs if blobs is not None else StoreBlobStore(st)
    if backend == "sim":
        be = SimBackend(store=st, blobs=blobs, latency=latency)
    elif backend == "daemons":
        if isinstance(base, StoreEngine):
            daemons = [WorkerDaemon(st, concurrency=max(1, workers), blobs=blobs).start()]
            owned.extend(daemons)
            be = DaemonBackend(st, daemons=[d.daemon_id for d in daemons], latency=latency)
        else:
            be = DaemonBackend(st, latency=latency)
    else:
        raise BackendUnavailable(f"unknown backend {backend!r}")
    owned.append(be)
    return BenchEnv(st, be, blobs, backend, addr, owned)
