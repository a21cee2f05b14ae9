"""Scatter-gather: partition a record table, transform it on a pool, reassemble."""

from __future__ import annotations

import random
import time

from ..pool import Pool
from . import tasks
from .env import make_env
from .records import BenchmarkRecord

CATEGORIES = ("alpha", "beta", "gamma", "delta")


def make_rows(n_rows: int, seed: int) -> list[tuple]:
    rng = random.Random(seed)
    return [(i, round(rng.uniform(-100, 100), 6), rng.choice(CATEGORIES)) for i in range(n_rows)]


def partition(rows: list, parts: int) -> list[list]:
    return [rows[lo:hi] for lo, hi in tasks.chunk_bounds(len(rows), parts)]


def scatter_gather(pool: Pool, rows: list, n_parts: int, transform: str = "identity") -> list[tuple]:
    parts = partition(rows, n_parts)
    out = pool.starmap(tasks.transform_rows, [(transform, p) for p in parts])
    return [tuple(row) for part in out for row in part]


def bench_scattergather(n_rows: int = 10_000, workers=(1, 2, 4, 8), transform: str = "identity",
                        backend: str = "sim", store="embedded", seed: int = 0) -> BenchmarkRecord:
    if n_rows < 0:
        raise ValueError("n_rows must be >= 0")
    if transform not in tasks.TRANSFORMS:
        raise ValueError(f"unknown transform {transform!r}")
    workers = [workers] if isinstance(workers, int) else list(workers)
    if not workers or min(workers) < 1:
        raise ValueError("need at least one worker")
    record = BenchmarkRecord(
        "scattergather",
        {"n_rows": n_rows, "workers": workers, "transform": transform, "backend": backend, "store": str(store)},
        seed=seed,
    )
    rows = make_rows(n_rows, seed)
    fn = tasks.TRANSFORMS[transform]
    expected = [fn(r) for r in rows]
    with make_env(backend, store, workers=max(workers)) as env:
        for w in workers:
            sizes = [len(p) for p in partition(rows, w)]
            t0 = time.perf_counter()
            with Pool(w, backend=env.backend, store=env.store, blobs=env.blobs, poll_interval=0.005) as pool:
                out = scatter_gather(pool, rows, w, transform)
                pool.close()
                pool.join()
            wall = time.perf_counter() - t0
            record.trials.append({
                "n_rows": n_rows, "workers": w, "transform": transform, "max_partition": max(sizes),
                "min_partition": min(sizes), "wall_s": wall, "order_preserved": int(out == expected),
            })
    record.extra["output_matches"] = all(t["order_preserved"] for t in record.trials)
    return record
