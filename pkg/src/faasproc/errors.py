"""Exception hierarchy shared by the store, the runtime and the primitives."""

import queue
import threading


class FaasprocError(Exception):
    pass


# Store-level


class StoreError(FaasprocError):
    """Raised by a store command that was rejected by the engine."""


class WrongType(StoreError, TypeError):
    pass


class IndexOutOfRange(StoreError, IndexError):
    pass


class Timeout(FaasprocError, TimeoutError):
    """A blocking command or primitive reached its deadline."""


class MalformedFrame(StoreError, ValueError):
    pass


class TransportError(FaasprocError, ConnectionError):
    pass


class TransportTimeout(TransportError, TimeoutError):
    pass


class ConnectionClosed(TransportError):
    pass


class StoreUnreachable(TransportError):
    pass


class BindError(FaasprocError, OSError):
    pass


# Runtime


class UnknownFunction(FaasprocError, LookupError):
    pass


class BackendUnavailable(FaasprocError):
    pass


class TaskFailed(FaasprocError):
    def __init__(self, index, message, traceback_text=""):
        super().__init__(f"task {index} failed: {message}")
        self.index = index
        self.message = message
        self.traceback = traceback_text


class JoinTimeout(Timeout):
    pass


class PoolClosed(FaasprocError, ValueError):
    pass


# Primitives


class DroppedResource(FaasprocError):
    pass


class LockNotHeld(FaasprocError, RuntimeError):
    pass


class TypeMismatch(FaasprocError, TypeError):
    pass


class UnknownClass(FaasprocError, LookupError):
    pass


class UnknownMethod(FaasprocError, AttributeError):
    pass


class Empty(queue.Empty, Timeout):
    pass


class Full(queue.Full, Timeout):
    pass


BrokenBarrierError = threading.BrokenBarrierError


# Blob layer


class NotFound(FaasprocError, FileNotFoundError):
    pass


class CommitFailed(FaasprocError, OSError):
    def __init__(self, path, buffer, cause=None):
        super().__init__(f"commit of {path!r} failed: {cause}")
        self.path = path
        self.buffer = buffer


# Benchmarks


class IntegrityError(FaasprocError):
    """A benchmark's output failed verification; ``record`` holds what was measured."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class ChecksumMismatch(IntegrityError):
    pass


class SortMismatch(IntegrityError):
    pass


class HashMismatch(IntegrityError):
    pass
