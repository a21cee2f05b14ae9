"""Pipe latency and streaming throughput through the store."""

from __future__ import annotations

import multiprocessing
import random
import statistics
import threading
import time

from ..errors import ChecksumMismatch
from ..ipc import Pipe
from ..pool import Process
from ..store import ThrottledStore
from . import tasks
from .env import BenchEnv, make_env
from .records import BenchmarkRecord

DEFAULT_SIZES = (1 << 10, 10 << 10, 100 << 10, 1 << 20)


def _payloads(size: int, seed: int, distinct: int = 8) -> list[bytes]:
    rng = random.Random(seed)
    return [rng.randbytes(size) for _ in range(distinct)]


def remote_latency(env: BenchEnv, size: int, rounds: int = 20, seed: int = 0) -> float:
    """Mean round trip (seconds) of ``size`` bytes to an echoing function and back."""
    here, there = Pipe(store=env.store)
    proc = Process(target=tasks.pipe_echo, args=(there, rounds + 1), backend=env.backend, store=env.store,
                   blobs=env.blobs, poll_interval=0.01)
    proc.start()
    there.drop()
    try:
        payload = _payloads(size, seed, 1)[0]
        here.send_bytes(payload)  # first exchange absorbs the startup
        here.recv_bytes()
        samples = []
        for _ in range(rounds):
            t0 = time.perf_counter()
            here.send_bytes(payload)
            if here.recv_bytes() != payload:
                raise ChecksumMismatch("echoed payload differs")
            samples.append(time.perf_counter() - t0)
        proc.join()
    finally:
        here.drop()
    return statistics.fmean(samples)


def local_latency(size: int, rounds: int = 20, seed: int = 0) -> float:
    """Same exchange over an OS pipe to an echo thread, as a local baseline."""
    here, there = multiprocessing.Pipe()

    def echo():
        for _ in range(rounds):
            there.send_bytes(there.recv_bytes())

    t = threading.Thread(target=echo, daemon=True)
    t.start()
    payload = _payloads(size, seed, 1)[0]
    samples = []
    for _ in range(rounds):
        t0 = time.perf_counter()
        here.send_bytes(payload)
        here.recv_bytes()
        samples.append(time.perf_counter() - t0)
    t.join()
    here.close()
    there.close()
    return statistics.fmean(samples)


def stream(env: BenchEnv, n_messages: int, payload_bytes: int, seed: int = 0,
           corrupt: set[int] | None = None) -> tuple[float, list[int]]:
    """Stream framed messages to a receiving function; returns (MB/s, bad indices).

    ``corrupt`` lists message indices whose frame is damaged on purpose.
    """
    here, there = Pipe(store=env.store)
    proc = Process(target=tasks.pipe_sink, args=(there, n_messages), backend=env.backend, store=env.store,
                   blobs=env.blobs, poll_interval=0.01)
    proc.start()
    there.drop()
    frames = [tasks.framed(p) for p in _payloads(payload_bytes, seed)]
    try:
        t0 = time.perf_counter()
        for i in range(n_messages):
            frame = frames[i % len(frames)]
            if corrupt and i in corrupt:
                frame = frame[:-1] + bytes([frame[-1] ^ 0xFF]) if payload_bytes else b"\0\0\0\0"
            here.send_bytes(frame)
        here.recv_bytes()
        elapsed = time.perf_counter() - t0
        _, nbytes, bad = proc.join()
    finally:
        here.drop()
    return nbytes / 1e6 / elapsed if elapsed > 0 else float("inf"), bad


def bench_pipe(n_messages: int = 1000, payload_bytes: int = 1 << 20, sizes=DEFAULT_SIZES, rounds: int = 20,
               cap_mb_s: float | None = None, backend: str = "sim", store="embedded",
               seed: int = 0) -> BenchmarkRecord:
    """Latency per payload size (remote and local), then streaming throughput.

    With ``cap_mb_s`` the stream is repeated behind a store-side bandwidth
    cap and again behind half of it. Raises :class:`ChecksumMismatch` if any
    streamed message arrives damaged.
    """
    if n_messages < 1 or payload_bytes < 0:
        raise ValueError("need at least one message and a non-negative payload size")
    record = BenchmarkRecord(
        "pipe",
        {"n_messages": n_messages, "payload_bytes": payload_bytes, "sizes": list(sizes), "rounds": rounds,
         "cap_mb_s": cap_mb_s, "backend": backend, "store": str(store)},
        seed=seed,
    )
    transport = str(store)
    with make_env(backend, store) as env:
        for size in sizes:
            for mode, lat in (("remote", remote_latency(env, size, rounds, seed)), ("local", local_latency(size, rounds, seed))):
                record.trials.append({
                    "transport": transport if mode == "remote" else "os-pipe", "mode": f"latency-{mode}",
                    "payload_bytes": size, "messages": rounds, "latency_ms": lat * 1e3,
                    "mb_per_s": 2 * size / 1e6 / lat if lat else 0.0, "cap_mb_s": 0.0, "checksum_failures": 0,
                })
        rate, bad = stream(env, n_messages, payload_bytes, seed)
        record.trials.append(_stream_row(transport, payload_bytes, n_messages, rate, 0.0, bad))
    if cap_mb_s:
        for cap in (cap_mb_s, cap_mb_s / 2):
            with make_env(backend, store, wrap_store=lambda s, c=cap: ThrottledStore(s, c)) as env:
                rate, more = stream(env, n_messages, payload_bytes, seed)
            record.trials.append(_stream_row(transport, payload_bytes, n_messages, rate, cap, more))
            bad = bad + more
    if bad:
        raise ChecksumMismatch(f"{len(bad)} streamed message(s) failed their checksum", record=record)
    return record


def _stream_row(transport, payload_bytes, n_messages, rate, cap, bad) -> dict:
    return {
        "transport": transport, "mode": "stream", "payload_bytes": payload_bytes, "messages": n_messages,
        "latency_ms": 0.0, "mb_per_s": rate, "cap_mb_s": cap, "checksum_failures": len(bad),
    }
