from __future__ import annotations

import threading
from concurrent.futures import Future
from dataclasses import dataclass
from typing import Optional, Sequence


@dataclass(frozen=True)
class InvocationRecord:
    invocation_id: str
    dispatch_time: float
    start_time: float
    end_time: float
    temperature: str
    worker_id: str
    startup_delay: float = 0.0
    label: object = None


@dataclass(frozen=True)
class DispatchEntry:
    invocation_id: str
    label: object
    dispatch_time: float


class Invocation:
    """An issued invocation; completes with an :class:`InvocationRecord`."""

    def __init__(self, invocation_id: str, label, dispatch_time: float):
        self.invocation_id = invocation_id
        self.label = label
        self.dispatch_time = dispatch_time
        self._future: Future = Future()

    def done(self) -> bool:
        return self._future.done()

    def record(self, timeout: Optional[float] = None) -> InvocationRecord:
        return self._future.result(timeout)

    def _complete(self, record: InvocationRecord) -> None:
        if not self._future.done():
            self._future.set_result(record)

    def _fail(self, exc: BaseException) -> None:
        if not self._future.done():
            self._future.set_exception(exc)

    def __repr__(self):
        state = "done" if self.done() else "running"
        return f"<Invocation {self.invocation_id[:8]} label={self.label!r} {state}>"


class Backend:
    """Common bookkeeping for compute backends."""

    name = "backend"

    def __init__(self):
        self._book_lock = threading.Lock()
        self._invocations: list[Invocation] = []
        self.dispatch_log: list[DispatchEntry] = []
        self.closed = False

    def invoke(self, messages: Sequence[bytes], labels: Sequence | None = None) -> list[Invocation]:
        raise NotImplementedError

    def _book(self, inv: Invocation) -> None:
        with self._book_lock:
            self._invocations.append(inv)
            self.dispatch_log.append(DispatchEntry(inv.invocation_id, inv.label, inv.dispatch_time))

    @property
    def invocations(self) -> list[Invocation]:
        with self._book_lock:
            return list(self._invocations)

    @property
    def invocation_count(self) -> int:
        with self._book_lock:
            return len(self._invocations)

    def close(self) -> None:
        self.closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
