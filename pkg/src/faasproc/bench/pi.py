"""Monte Carlo estimate of pi, timed across worker counts."""

from __future__ import annotations

import math
import time

from ..orchestrator import Orchestrator
from . import tasks
from .env import make_env
from .records import BenchmarkRecord


def estimate_pi(orch: Orchestrator, total_samples: int, n_workers: int, seed: int = 0) -> tuple[int, float]:
    """Split the samples evenly over ``n_workers`` tasks; returns (hits, wall seconds)."""
    sizes = [hi - lo for lo, hi in tasks.chunk_bounds(total_samples, n_workers)]
    t0 = time.perf_counter()
    hits = orch.join(orch.submit_job([(tasks.pi_count, (n, seed, i)) for i, n in enumerate(sizes)]))
    return sum(hits), time.perf_counter() - t0


def bench_pi(total_samples: int = 10**7, workers=(1, 2, 4, 8), backend: str = "sim", store="embedded",
             seed: int = 0, latency=None) -> BenchmarkRecord:
    """Estimate pi once per worker count; speedup is relative to the first count."""
    if total_samples < 1:
        raise ValueError("total_samples must be >= 1")
    workers = list(workers)
    if not workers or min(workers) < 1:
        raise ValueError("worker counts must be >= 1")
    record = BenchmarkRecord(
        "pi", {"total_samples": total_samples, "workers": workers, "backend": backend, "store": str(store)}, seed=seed
    )
    base = None
    with make_env(backend, store, latency, workers=max(workers)) as env:
        orch = Orchestrator(env.store, env.backend, env.blobs, poll_interval=0.005)
        estimate_pi(orch, min(total_samples, 1000), 1, seed)  # keep one-time imports out of the timings
        for w in workers:
            hits, wall = estimate_pi(orch, total_samples, w, seed)
            base = wall if base is None else base
            estimate = 4.0 * hits / total_samples
            record.trials.append({
                "workers": w, "samples": total_samples, "hits": hits, "estimate": estimate,
                "abs_error": abs(estimate - math.pi), "wall_s": wall, "speedup": base / wall if wall else 0.0,
            })
    return record
