"""Parallel sort three ways: in-place shared array, copied slices, message passing.

Round trips are counted only on the sort's own data structures (the shared
array, the barrier that orders merge levels, or the pipes), from the moment
they exist until the sorted output is back in the parent. Worker-side
calls are only seen when workers share the benchmark's store object, as
with the simulator or in-process daemons; external daemons are not counted.
"""

from __future__ import annotations

import random
import time

from ..errors import SortMismatch
from ..ipc import Array, Barrier, Pipe
from ..orchestrator import Orchestrator
from ..store import CountingStore
from . import tasks
from .env import BenchEnv, make_env
from .records import BenchmarkRecord

STRATEGIES = ("inplace_shared", "copy_shared", "message_passing")


class _Tracked:
    """Key filter for a CountingStore, filled in once the resources exist."""

    def __init__(self):
        self.keys: set[str] = set()
        self.prefixes: tuple[str, ...] = ()

    def __call__(self, key) -> bool:
        return isinstance(key, str) and (key in self.keys or key.startswith(self.prefixes))


def make_data(array_len: int, seed: int) -> list[int]:
    rng = random.Random(seed)
    return [rng.randint(-(10**9), 10**9) for _ in range(array_len)]


def run_sort(env: BenchEnv, counter: CountingStore, tracked: _Tracked, data: list[int], n_workers: int,
             strategy: str) -> tuple[list[int], int, int, float]:
    """Sort ``data``; returns (output, merges, round trips, wall seconds)."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; pick one of {STRATEGIES}")
    w = max(1, min(n_workers, len(data)))
    bounds = tasks.chunk_bounds(len(data), w)
    orch = Orchestrator(env.store, env.backend, env.blobs, poll_interval=0.005)
    owned = []
    try:
        t0 = time.perf_counter()
        if strategy == "message_passing":
            parents = [Pipe(store=env.store) for _ in range(w)]
            links = {pair: Pipe(duplex=False, store=env.store) for level in tasks.merge_plan(w) for pair in level}
            owned += [end for pair in (*parents, *links.values()) for end in pair]
            tracked.keys = {k for end in owned for k in end.data_keys}
            calls = []
            for rank in range(w):
                inbound = {s: links[(r, s)][0] for (r, s) in links if r == rank}
                outbound = next((links[(r, s)][1] for (r, s) in links if s == rank), None)
                calls.append((tasks.sort_message, (rank, w, parents[rank][1], inbound, outbound)))
            counter.reset()
            manifest = orch.submit_job(calls)
            for rank, (lo, hi) in enumerate(bounds):
                parents[rank][0].send(data[lo:hi])
            output = parents[0][0].recv()
            round_trips = counter.round_trips
            merges = orch.join(manifest, drain=True)
        else:
            arr = Array("q", data, lock=False, store=env.store)
            barrier = Barrier(w, store=env.store)
            owned += [arr, barrier]
            tracked.keys = {arr.key("data")}
            tracked.prefixes = tuple(barrier.key(n) for n in barrier.key_names) + (barrier.key("w/"),)
            inplace = strategy == "inplace_shared"
            counter.reset()
            manifest = orch.submit_job([(tasks.sort_shared, (arr, barrier, r, bounds, inplace)) for r in range(w)])
            merges = orch.join(manifest, drain=True)
            output = arr[:]
            round_trips = counter.round_trips
        wall = time.perf_counter() - t0
    finally:
        tracked.keys, tracked.prefixes = set(), ()
        for handle in owned:
            handle.drop()
    return output, sum(merges), round_trips, wall


def bench_sort(array_len: int = 10**5, workers: int = 4, strategies=STRATEGIES, backend: str = "sim",
               store="embedded", seed: int = 0) -> BenchmarkRecord:
    """Run every strategy on the same seeded data and check against ``sorted``.

    Raises :class:`SortMismatch` (with the record attached) if any output
    differs from the oracle.
    """
    if array_len < 0 or workers < 1:
        raise ValueError("array_len must be >= 0 and workers >= 1")
    record = BenchmarkRecord(
        "sort", {"array_len": array_len, "workers": workers, "strategies": list(strategies), "backend": backend,
                 "store": str(store)}, seed=seed,
    )
    data = make_data(array_len, seed)
    oracle = sorted(data)
    tracked = _Tracked()
    holder = {}

    def wrap(inner):
        holder["counter"] = CountingStore(inner, match=tracked)
        return holder["counter"]

    failed = []
    with make_env(backend, store, workers=workers, wrap_store=wrap) as env:
        for strategy in strategies:
            output, merges, rts, wall = run_sort(env, holder["counter"], tracked, data, workers, strategy)
            ok = output == oracle
            if not ok:
                failed.append(strategy)
            record.trials.append({
                "strategy": strategy, "array_len": array_len, "workers": workers, "merges": merges,
                "round_trips": rts, "wall_s": wall, "matches_oracle": int(ok),
            })
    if failed:
        raise SortMismatch(f"output differs from the oracle for {failed}", record=record)
    return record
