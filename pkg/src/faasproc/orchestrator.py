"""Main-side job lifecycle: serialize, upload, invoke, join, report."""

from __future__ import annotations

import csv
import io
import pickle
import threading
import time
from dataclasses import astuple, dataclass, field
from typing import Iterable, Sequence

from . import context
from .errors import JoinTimeout, StoreUnreachable, TaskFailed, TransportError
from .faas.worker import ARGS_BUCKET
from .registry import Registry, default_registry, function_name
from .task import TaskDescriptor, TaskTrace, dumps_args, new_id, parse_record, task_message

PENDING, RUNNING, DONE, FAILED = "pending", "running", "done", "failed"
_ORDER = {PENDING: 0, RUNNING: 1, DONE: 2, FAILED: 2}

CSV_COLUMNS = ("job_id", "task_index", "serialize_ms", "upload_ms", "invoke_ms", "setup_ms", "run_ms", "join_ms")
PHASES = CSV_COLUMNS[2:]


@dataclass(frozen=True)
class PhaseTrace:
    job_id: str
    task_index: int
    serialize_ms: float
    upload_ms: float
    invoke_ms: float
    setup_ms: float
    run_ms: float
    join_ms: float

    @property
    def total_ms(self) -> float:
        """Overhead only: every phase except the function's own run time."""
        return self.serialize_ms + self.upload_ms + self.invoke_ms + self.setup_ms + self.join_ms


@dataclass
class PhaseReport:
    rows: list[PhaseTrace]

    @property
    def means(self) -> dict[str, float]:
        if not self.rows:
            return {p: 0.0 for p in (*PHASES, "total_ms")}
        n = len(self.rows)
        out = {p: sum(getattr(r, p) for r in self.rows) / n for p in PHASES}
        out["total_ms"] = sum(r.total_ms for r in self.rows) / n
        return out

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow([row.job_id, row.task_index] + [f"{v:.3f}" for v in astuple(row)[2:]])
        text = buf.getvalue()
        if target is not None:
            if hasattr(target, "write"):
                target.write(text)
            else:
                with open(target, "w", newline="") as fh:
                    fh.write(text)
        return text


@dataclass
class _TaskState:
    serialize_ms: float = 0.0
    upload_ms: float = 0.0
    dispatch_time: float | None = None
    detected: float | None = None
    trace: TaskTrace | None = None
    record: object = None


@dataclass
class JobManifest:
    job_id: str
    tasks: list[TaskDescriptor]
    backend: str
    created_at: float = field(default_factory=time.time)
    state: str = PENDING

    def __post_init__(self):
        self._lock = threading.RLock()
        self._join_lock = threading.Lock()
        self._states = [_TaskState() for _ in self.tasks]
        self._results: list | None = None
        self._failure: TaskFailed | None = None
        self._cancelled: BaseException | None = None
        self.invocations: list = []

    def advance(self, state: str) -> None:
        with self._lock:
            if _ORDER[state] < _ORDER[self.state] or (self.state in (DONE, FAILED) and state != self.state):
                raise ValueError(f"illegal manifest transition {self.state} -> {state}")
            self.state = state

    def cancel(self, exc: BaseException) -> None:
        """Make any current or later :meth:`Orchestrator.join` raise ``exc``."""
        self._cancelled = exc

    @property
    def result_keys(self) -> list[str]:
        return [t.result_key for t in self.tasks]

    def __len__(self):
        return len(self.tasks)


def _normalize(task) -> tuple:
    if not isinstance(task, (tuple, list)) or not 1 <= len(task) <= 3:
        raise TypeError("a task is (function, args) or (function, args, kwargs)")
    fn = task[0]
    args = task[1] if len(task) > 1 else ()
    kwargs = task[2] if len(task) > 2 else {}
    return fn, tuple(args), dict(kwargs or {})


class Orchestrator:
    """Submits jobs of registered-function calls to a backend and joins them.

    Results travel through the store only: a task is complete once its
    result key exists, which :meth:`join` detects by polling.
    """

    def __init__(self, store=None, backend=None, blobs=None, poll_interval: float = 0.05,
                 inline_threshold: int = 1024, registry: Registry | None = None):
        self.store = store if store is not None else context.current_store()
        self.blobs = blobs if blobs is not None else (getattr(backend, "blobs", None) or context.current_blobs())
        self.backend = backend if backend is not None else context.current_backend()
        self.poll_interval = poll_interval
        self.inline_threshold = inline_threshold
        self.registry = registry or default_registry

    # ------------------------------------------------------------ submit

    def prepare(self, tasks: Iterable, chunked: bool = False, job_id: str | None = None) -> JobManifest:
        """Serialize and upload ``tasks`` into a pending manifest (no dispatch).

        With ``chunked`` each task is ``(function, [(args, kwargs), ...])``
        and the worker returns the list of per-call results.
        """
        calls = [_normalize(t) for t in tasks]
        names = [function_name(fn) for fn, _, _ in calls]
        for name in dict.fromkeys(names):
            self.registry.get(name)  # UnknownFunction before anything leaves the process
        job_id = job_id or new_id()
        descriptors, states = [], []
        try:
            for index, ((_, args, kwargs), name) in enumerate(zip(calls, names)):
                state = _TaskState()
                t0 = time.perf_counter()
                if chunked:
                    blob = pickle.dumps([(tuple(a), dict(k)) for a, k in args], protocol=pickle.HIGHEST_PROTOCOL)
                else:
                    blob = dumps_args(args, kwargs)
                t1 = time.perf_counter()
                ref = None
                if len(blob) > self.inline_threshold:
                    ref = f"{job_id}/{index}"
                    self.blobs.put(ARGS_BUCKET, ref, blob)
                t2 = time.perf_counter()
                state.serialize_ms, state.upload_ms = (t1 - t0) * 1e3, (t2 - t1) * 1e3
                descriptors.append(
                    TaskDescriptor(job_id, index, name, b"" if ref else blob, ref, chunked, enqueue_time=time.time())
                )
                states.append(state)
        except TransportError as exc:
            raise StoreUnreachable(f"cannot upload task arguments: {exc}") from exc
        manifest = JobManifest(job_id, descriptors, getattr(self.backend, "name", type(self.backend).__name__))
        manifest._states = states
        return manifest

    def submit_job(self, tasks: Iterable, chunked: bool = False) -> JobManifest:
        manifest = self.prepare(tasks, chunked=chunked)
        if not manifest.tasks:
            manifest._results = []
            manifest.advance(DONE)
            return manifest
        manifest.advance(RUNNING)
        try:
            invocations = self.backend.invoke([task_message(d) for d in manifest.tasks], labels=range(len(manifest)))
        except TransportError as exc:
            manifest.advance(FAILED)
            raise StoreUnreachable(str(exc)) from exc
        manifest.invocations = invocations
        for inv, state in zip(invocations, manifest._states):
            state.dispatch_time = inv.dispatch_time
        return manifest

    def map(self, fn, items: Iterable, timeout: float | None = None) -> list:
        manifest = self.submit_job([(fn, (item,)) for item in items])
        return self.join(manifest, timeout=timeout)

    # -------------------------------------------------------------- join

    def join(self, manifest: JobManifest, poll_interval: float | None = None, timeout: float | None = None,
             drain: bool = False) -> list:
        """Wait for every task and return results in task-index order.

        Fails fast on the first error record seen unless ``drain`` is set,
        in which case all results are consumed before the lowest-index
        failure is raised.
        """
        poll = self.poll_interval if poll_interval is None else poll_interval
        with manifest._join_lock:
            if manifest._failure is not None:
                raise manifest._failure
            if manifest._results is not None:
                return list(manifest._results)
            deadline = None if timeout is None else time.monotonic() + timeout
            pending = [i for i, s in enumerate(manifest._states) if s.record is None]
            while pending:
                if manifest._cancelled is not None:
                    raise manifest._cancelled
                present = self.store.batch([("key_exists", (manifest.tasks[i].result_key,)) for i in pending])
                now = time.time()
                found = [i for i, ok in zip(pending, present) if ok]
                if found:
                    self._collect(manifest, found, now)
                    pending = [i for i in pending if manifest._states[i].record is None]
                    failed = [i for i in found if not manifest._states[i].record.ok]
                    if failed and not drain:
                        break
                if not pending:
                    break
                if deadline is not None and time.monotonic() >= deadline:
                    raise JoinTimeout(f"job {manifest.job_id}: {len(pending)} of {len(manifest)} tasks unfinished")
                time.sleep(poll)
            failures = [i for i, s in enumerate(manifest._states) if s.record is not None and not s.record.ok]
            if failures:
                rec = manifest._states[failures[0]].record
                manifest._failure = TaskFailed(failures[0], rec.message, rec.traceback)
                manifest.advance(FAILED)
                raise manifest._failure
            manifest._results = [s.record.value() for s in manifest._states]
            for s in manifest._states:
                s.record = _Consumed(s.record)
            manifest.advance(DONE)
            return list(manifest._results)

    def _collect(self, manifest: JobManifest, indices: Sequence[int], detected: float) -> None:
        calls = []
        for i in indices:
            task = manifest.tasks[i]
            calls += [("list_index_get", (task.result_key, 0)), ("list_index_get", (task.trace_key, 0))]
        calls += [("key_delete", (manifest.tasks[i].result_key,)) for i in indices]
        calls += [("key_delete", (manifest.tasks[i].trace_key,)) for i in indices]
        values = self.store.batch(calls)
        for n, i in enumerate(indices):
            state = manifest._states[i]
            state.detected = detected
            state.record = parse_record(values[2 * n])
            state.trace = TaskTrace.from_bytes(values[2 * n + 1])
            if manifest.tasks[i].args_ref is not None:
                self.blobs.delete(ARGS_BUCKET, manifest.tasks[i].args_ref)

    # ------------------------------------------------------------ report

    def phase_report(self, manifest: JobManifest) -> PhaseReport:
        rows = []
        for desc, s in zip(manifest.tasks, manifest._states):
            if s.trace is None:
                continue
            dispatch = s.dispatch_time if s.dispatch_time is not None else desc.enqueue_time
            rows.append(
                PhaseTrace(
                    manifest.job_id,
                    desc.task_index,
                    s.serialize_ms,
                    s.upload_ms,
                    max(0.0, s.trace.start - dispatch) * 1e3,
                    (s.trace.setup_end - s.trace.start) * 1e3,
                    (s.trace.end - s.trace.setup_end) * 1e3,
                    max(0.0, s.detected - s.trace.end) * 1e3,
                )
            )
        return PhaseReport(rows)


class _Consumed:
    """Stands in for a result record once its value has been handed out."""

    __slots__ = ("ok",)

    def __init__(self, record):
        self.ok = record.ok


def validate_phase_csv(text: str) -> list[dict]:
    """Parse a phase-report CSV, checking the header and numeric columns."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected phase CSV header {reader.fieldnames}")
    rows = []
    for row in reader:
        int(row["task_index"])
        for p in PHASES:
            if float(row[p]) < 0:
                raise ValueError(f"negative {p} in row {row}")
        rows.append(row)
    return rows


__all__ = [
    "CSV_COLUMNS",
    "JobManifest",
    "Orchestrator",
    "PhaseReport",
    "PhaseTrace",
    "validate_phase_csv",
]
