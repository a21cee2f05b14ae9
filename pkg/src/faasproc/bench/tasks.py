"""Task functions used by the benchmarks.

Workers resolve these by name, so this module must be imported on both the
orchestrating side and in every worker (``faasproc-worker --registry
faasproc.bench.tasks``).
"""

from __future__ import annotations

import hashlib
import heapq
import random
import time
import zlib

from ..objectfs import ObjectFS
from ..registry import register

_CRC = 4


@register("bench.echo")
def echo(x):
    return x


@register("bench.double")
def double(x):
    return 2 * x


@register("bench.sleep")
def sleep(seconds: float) -> float:
    time.sleep(seconds)
    return seconds


@register("bench.noop")
def noop(*args, **kwargs):
    return None


@register("bench.fail")
def fail(message: str = "task failed on purpose"):
    raise RuntimeError(message)


# ---------------------------------------------------------------- Monte Carlo


@register("bench.pi_count")
def pi_count(samples: int, seed: int, stream: int, chunk: int = 1 << 20) -> int:
    """Number of uniform points in the unit square that fall in the quarter circle."""
    import numpy as np

    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))
    hits = 0
    left = samples
    buf = np.empty(2 * min(chunk, max(samples, 1)))
    while left > 0:
        n = min(chunk, left)
        xy = buf[: 2 * n].reshape(2, n)
        rng.random(out=xy)
        np.square(xy, out=xy)
        hits += int(np.count_nonzero(xy[0] + xy[1] <= 1.0))
        left -= n
    return hits


# ----------------------------------------------------------------------- pipe


def framed(payload: bytes) -> bytes:
    return zlib.crc32(payload).to_bytes(_CRC, "big") + payload


def check_frame(message: bytes) -> bool:
    return zlib.crc32(message[_CRC:]).to_bytes(_CRC, "big") == message[:_CRC]


@register("bench.pipe_echo")
def pipe_echo(conn, rounds: int) -> int:
    for _ in range(rounds):
        conn.send_bytes(conn.recv_bytes())
    return rounds


@register("bench.pipe_sink")
def pipe_sink(conn, n_messages: int) -> tuple[int, int, list[int]]:
    """Receive ``n_messages`` framed messages; return (count, bytes, bad indices)."""
    nbytes, bad = 0, []
    for i in range(n_messages):
        message = conn.recv_bytes()
        nbytes += len(message) - _CRC
        if not check_frame(message):
            bad.append(i)
    conn.send_bytes(b"done")
    return n_messages, nbytes, bad


# ----------------------------------------------------------------------- sort


def merge_runs(left: list, right: list) -> list:
    return list(heapq.merge(left, right))


def merge_plan(n_chunks: int) -> list[list[tuple[int, int]]]:
    """Tree-merge schedule: per level, (receiver rank, sender rank) pairs."""
    levels, step = [], 1
    while step < n_chunks:
        levels.append([(r, r + step) for r in range(0, n_chunks, 2 * step) if r + step < n_chunks])
        step *= 2
    return levels


def chunk_bounds(length: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous balanced split; sizes differ by at most one."""
    q, r = divmod(length, parts)
    bounds, start = [], 0
    for i in range(parts):
        end = start + q + (1 if i < r else 0)
        bounds.append((start, end))
        start = end
    return bounds


def _span(bounds, rank, sender, n_chunks, step):
    lo = bounds[rank][0]
    mid = bounds[sender][0]
    hi = bounds[min(sender + step, n_chunks) - 1][1]
    return lo, mid, hi


@register("bench.sort_shared")
def sort_shared(arr, barrier, rank: int, bounds: list, inplace: bool) -> int:
    """One worker of the shared-array sort: sort a chunk, then tree-merge.

    In place, every element moves through the store on its own; otherwise
    whole runs are copied out and back as slices. Levels are separated by a
    barrier since the merge partner's run must be final before it is read.
    """
    n_chunks = len(bounds)
    lo, hi = bounds[rank]
    if inplace:
        run = sorted(arr[i] for i in range(lo, hi))
        for i, v in zip(range(lo, hi), run):
            arr[i] = v
    else:
        arr[lo:hi] = sorted(arr[lo:hi])
    merges = 0
    step = 1
    for level in merge_plan(n_chunks):
        barrier.wait()
        for receiver, sender in level:
            if receiver != rank:
                continue
            lo, mid, hi = _span(bounds, receiver, sender, n_chunks, step)
            if inplace:
                left = [arr[i] for i in range(lo, mid)]
                right = [arr[i] for i in range(mid, hi)]
                for i, v in zip(range(lo, hi), merge_runs(left, right)):
                    arr[i] = v
            else:
                arr[lo:hi] = merge_runs(arr[lo:mid], arr[mid:hi])
            merges += 1
        step *= 2
    return merges


@register("bench.sort_message")
def sort_message(rank: int, n_chunks: int, parent, inbound: dict, outbound) -> int:
    """One worker of the message-passing sort.

    Receives its chunk from the parent, sorts it, merges runs received from
    partners, then passes its run to the next receiver (or to the parent).
    """
    run = sorted(parent.recv())
    merges = 0
    for level in merge_plan(n_chunks):
        for receiver, sender in level:
            if receiver == rank:
                run = merge_runs(run, inbound[sender].recv())
                merges += 1
            elif sender == rank:
                outbound.send(run)
                return merges
    parent.send(run)
    return merges


# ---------------------------------------------------------------------- blobs


def blob_content(size: int, seed: int, index: int) -> bytes:
    return random.Random(f"{seed}/{index}").randbytes(size)


@register("bench.blob_write")
def blob_write(path: str, size: int, seed: int, index: int, bucket: str) -> tuple[str, float]:
    data = blob_content(size, seed, index)
    digest = hashlib.sha256(data).hexdigest()
    t0 = time.perf_counter()
    ObjectFS(bucket=bucket).write_bytes(path, data)
    return digest, time.perf_counter() - t0


@register("bench.blob_read")
def blob_read(path: str, bucket: str) -> tuple[str, int, float]:
    t0 = time.perf_counter()
    with ObjectFS(bucket=bucket).open(path, "rb") as fh:
        data = fh.read()
    elapsed = time.perf_counter() - t0
    return hashlib.sha256(data).hexdigest(), len(data), elapsed


# ------------------------------------------------------------ scatter-gather

TRANSFORMS = {
    "identity": lambda row: row,
    "scale": lambda row: (row[0], row[1] * 2.0, row[2]),
    "upper": lambda row: (row[0], row[1], row[2].upper()),
}


@register("bench.transform_rows")
def transform_rows(name: str, rows: list) -> list:
    fn = TRANSFORMS[name]
    return [fn(tuple(row)) for row in rows]
