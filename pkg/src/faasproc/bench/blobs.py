"""Parallel object write and read-back rates."""

from __future__ import annotations

import time

from ..errors import HashMismatch
from ..objectfs import MemoryBlobStore, ThrottledBlobStore
from ..orchestrator import Orchestrator
from ..store import EMBEDDED
from ..task import new_id
from . import tasks
from .env import make_env
from .records import BenchmarkRecord

BUCKET = "faasproc-bench"


def bench_blobs(workers=(1, 2, 4, 8), object_mb: float = 16.0, per_connection_mb_s: float | None = None,
                aggregate_mb_s: float | None = None, backend: str = "sim", store="embedded",
                seed: int = 0, corrupt: bool = False) -> BenchmarkRecord:
    """Each worker writes one object, then each reads its object back.

    Rates are aggregate MB/s over the whole phase. On an embedded store the
    objects live in an in-memory blob store, optionally behind
    per-connection and aggregate bandwidth caps; on a networked store they
    go through the store itself and the caps do not apply. ``corrupt``
    damages one stored object between the phases, to exercise the hash
    check.
    """
    workers = [workers] if isinstance(workers, int) else list(workers)
    if not workers or min(workers) < 1:
        raise ValueError("need at least one worker")
    if object_mb <= 0:
        raise ValueError("object_mb must be > 0")
    size = int(object_mb * (1 << 20))
    record = BenchmarkRecord(
        "blobs",
        {"workers": workers, "object_mb": object_mb, "per_connection_mb_s": per_connection_mb_s,
         "aggregate_mb_s": aggregate_mb_s, "backend": backend, "store": str(store)},
        seed=seed,
    )
    raw = MemoryBlobStore() if not isinstance(store, str) or store == EMBEDDED else None
    blobs = ThrottledBlobStore(raw, per_connection_mb_s, aggregate_mb_s) if raw is not None else None
    failures = 0
    with make_env(backend, store, workers=max(workers), blobs=blobs) as env:
        raw = raw if raw is not None else env.blobs
        orch = Orchestrator(env.store, env.backend, env.blobs, poll_interval=0.005)
        for w in workers:
            run = new_id()[:12]
            paths = [f"{run}/part-{i}" for i in range(w)]
            t0 = time.perf_counter()
            written = orch.join(orch.submit_job(
                [(tasks.blob_write, (p, size, seed, i, BUCKET)) for i, p in enumerate(paths)]
            ))
            write_wall = time.perf_counter() - t0
            if corrupt:
                key = paths[0]
                raw.put(BUCKET, key, bytes([raw.get(BUCKET, key)[0] ^ 0xFF]) + raw.get(BUCKET, key)[1:])
            t0 = time.perf_counter()
            read = orch.join(orch.submit_job([(tasks.blob_read, (p, BUCKET)) for p in paths]))
            read_wall = time.perf_counter() - t0
            bad = sum(1 for (want, _), (got, n, _) in zip(written, read) if want != got or n != size)
            failures += bad
            for p in paths:
                raw.delete(BUCKET, p)
            total_mb = w * size / 1e6
            record.trials.append({
                "workers": w, "object_mb": object_mb, "write_mb_s": total_mb / write_wall,
                "read_mb_s": total_mb / read_wall, "hash_failures": bad,
            })
    if failures:
        raise HashMismatch(f"{failures} object(s) read back with the wrong content", record=record)
    return record
