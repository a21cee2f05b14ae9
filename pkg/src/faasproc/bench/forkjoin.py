"""Fork-join overhead: a map of sleep tasks, decomposed per phase."""

from __future__ import annotations

import time

from ..faas import COLD, WARM, LatencyModel, SimBackend
from ..orchestrator import PHASES, Orchestrator
from . import tasks
from .env import BenchEnv, make_env
from .records import BenchmarkRecord


def run_forkjoin(env: BenchEnv, n_tasks: int, sleep_s: float, poll_interval: float = 0.05,
                 temperature: str | None = None, trial: int = 0) -> tuple[dict, list[dict], object]:
    """One map of ``n_tasks`` sleep tasks; returns (summary row, ramp rows, report).

    ``temperature="warm"`` pre-warms enough simulator slots for every task;
    ``"cold"`` (or ``None``) leaves the backend as it is.
    """
    if temperature == WARM and isinstance(env.backend, SimBackend):
        env.backend.prewarm(n_tasks)
    orch = Orchestrator(env.store, env.backend, env.blobs, poll_interval=poll_interval)
    t0 = time.time()
    manifest = orch.submit_job([(tasks.sleep, (sleep_s,)) for _ in range(n_tasks)])
    orch.join(manifest, drain=True)
    wall = time.time() - t0
    report = orch.phase_report(manifest)
    means = report.means
    row = {
        "trial": trial, "temperature": temperature or "", "n_tasks": n_tasks, "sleep_s": sleep_s,
        "wall_s": wall, "overhead_s": wall - sleep_s,
        **{p: means[p] for p in PHASES if p != "run_ms"}, "total_ms": means["total_ms"],
    }
    ramp = []
    for desc, state in zip(manifest.tasks, manifest._states):
        dispatch = state.dispatch_time if state.dispatch_time is not None else desc.enqueue_time
        ramp.append({
            "trial": trial, "task_index": desc.task_index, "dispatch_s": dispatch - t0,
            "start_s": state.trace.start - t0, "end_s": state.trace.end - t0, "detected_s": state.detected - t0,
        })
    return row, ramp, report


def bench_forkjoin(n_tasks: int = 8, sleep_s: float = 0.5, latency: LatencyModel | None = None,
                   temperatures=(WARM, COLD), repetitions: int = 1, poll_interval: float = 0.05,
                   backend: str = "sim", store="embedded", seed: int = 0) -> BenchmarkRecord:
    """Overhead of a fork-join map per startup temperature.

    Each temperature gets a fresh environment so cold runs really start cold.
    The record's ``extra["ramp"]`` holds per-task start/end offsets.
    """
    if n_tasks < 1:
        raise ValueError("n_tasks must be >= 1")
    latency = latency or LatencyModel.lambda_defaults(seed=seed)
    record = BenchmarkRecord(
        "forkjoin",
        {"n_tasks": n_tasks, "sleep_s": sleep_s, "poll_interval": poll_interval, "backend": backend,
         "store": str(store), "latency": latency.as_dict(), "temperatures": list(temperatures)},
        repetitions=repetitions, seed=seed,
    )
    ramp_rows = []
    trial = 0
    for _ in range(repetitions):
        for temp in temperatures:
            with make_env(backend, store, latency, workers=n_tasks) as env:
                row, ramp, _ = run_forkjoin(env, n_tasks, sleep_s, poll_interval, temp, trial)
            record.trials.append(row)
            ramp_rows.extend(ramp)
            trial += 1
    record.extra["ramp"] = ramp_rows
    return record
