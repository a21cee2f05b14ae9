"""Store wrappers used by tests and benchmarks: call counting and bandwidth caps."""

from __future__ import annotations

import threading
import time
from collections import Counter
from typing import Callable, Iterable, Optional

COMMANDS = (
    "push_tail",
    "pop_head_blocking",
    "list_len",
    "list_index_get",
    "list_index_set",
    "list_range",
    "hash_set",
    "hash_get",
    "hash_del",
    "hash_get_all",
    "counter_add",
    "key_delete",
    "key_expire",
    "key_exists",
    "ping",
)


class StoreProxy:
    """Forwards every command and ``batch`` to an inner store."""

    def __init__(self, inner):
        self.inner = inner

    def __getattr__(self, name):
        return getattr(self.inner, name)


class CountingStore(StoreProxy):
    """Counts store round trips; a ``batch`` counts as one.

    With ``match`` set, only calls whose key satisfies it are counted, which
    lets a benchmark attribute round trips to its data structures alone.
    """

    def __init__(self, inner, match: Optional[Callable[[str], bool]] = None):
        super().__init__(inner)
        self.match = match
        self._lock = threading.Lock()
        self.round_trips = 0
        self.by_command: Counter = Counter()

    def _count(self, names: Iterable[str], keys: Iterable[str]):
        if self.match is not None and not any(self.match(k) for k in keys):
            return
        with self._lock:
            self.round_trips += 1
            self.by_command.update(names)

    def reset(self):
        with self._lock:
            self.round_trips = 0
            self.by_command.clear()

    def batch(self, calls):
        calls = list(calls)
        self._count([n for n, _ in calls], [a[0] for _, a in calls if a])
        return self.inner.batch(calls)

    def __getattr__(self, name):
        attr = getattr(self.inner, name)
        if name not in COMMANDS:
            return attr

        def counted(*args, **kwargs):
            self._count([name], args[:1])
            return attr(*args, **kwargs)

        return counted


def _payload_size(name, args, result) -> int:
    size = 0
    if name in ("push_tail", "list_index_set", "hash_set"):
        size += sum(len(a) for a in args[1:] if isinstance(a, (bytes, bytearray)))
    if isinstance(result, (bytes, bytearray)):
        size += len(result)
    elif isinstance(result, list):
        size += sum(len(v) for v in result if isinstance(v, (bytes, bytearray)))
    elif isinstance(result, dict):
        size += sum(len(v) for v in result.values())
    return size


class ThrottledStore(StoreProxy):
    """Caps the store-side payload bandwidth shared by all callers.

    Transfers reserve time on a single virtual link of ``mb_per_s`` and the
    caller sleeps until its reservation ends.
    """

    def __init__(self, inner, mb_per_s: float):
        super().__init__(inner)
        self.bytes_per_s = mb_per_s * 1e6
        self._lock = threading.Lock()
        self._free_at = 0.0

    def _charge(self, nbytes: int):
        if nbytes <= 0:
            return
        with self._lock:
            start = max(time.monotonic(), self._free_at)
            self._free_at = start + nbytes / self.bytes_per_s
            end = self._free_at
        delay = end - time.monotonic()
        if delay > 0:
            time.sleep(delay)

    def batch(self, calls):
        calls = list(calls)
        results = self.inner.batch(calls)
        self._charge(sum(_payload_size(n, a, r) for (n, a), r in zip(calls, results)))
        return results

    def __getattr__(self, name):
        attr = getattr(self.inner, name)
        if name not in COMMANDS:
            return attr

        def throttled(*args, **kwargs):
            result = attr(*args, **kwargs)
            self._charge(_payload_size(name, args, result))
            return result

        return throttled
