"""Binary formats exchanged between the orchestrating side and workers."""

from __future__ import annotations

import pickle
import struct
import uuid
from dataclasses import dataclass, field

FIELD = struct.Struct(">I")

# Invocation payload tags.
INVOKE_TASK = 0x01
INVOKE_POOL_WORKER = 0x02

# Pool job-queue message tags.
QUEUE_TASK = 0x00
QUEUE_SENTINEL = 0xFF

STATUS_OK = 0x00
STATUS_ERROR = 0x01

_FLAG_INLINE = 0x01
_FLAG_CHUNKED = 0x02
_DESC_HEAD = struct.Struct(">BBId")
_TRACE = struct.Struct(">ddd")


def pack_fields(*fields: bytes) -> bytes:
    return b"".join(FIELD.pack(len(f)) + f for f in fields)


def unpack_fields(data: bytes, offset: int = 0) -> list[bytes]:
    out = []
    while offset < len(data):
        (n,) = FIELD.unpack_from(data, offset)
        offset += 4
        if offset + n > len(data):
            raise ValueError("truncated field")
        out.append(data[offset : offset + n])
        offset += n
    return out


def result_key(job_id: str, index: int) -> str:
    return f"job/{job_id}/task/{index}/result"


def trace_key(job_id: str, index: int) -> str:
    return f"job/{job_id}/task/{index}/trace"


def new_id() -> str:
    return uuid.uuid4().hex


@dataclass(frozen=True)
class TaskDescriptor:
    job_id: str
    task_index: int
    function_name: str
    args_blob: bytes = b""
    args_ref: str | None = None
    chunked: bool = False
    enqueue_time: float = 0.0
    result_key: str = field(default="")

    def __post_init__(self):
        if not self.result_key:
            object.__setattr__(self, "result_key", result_key(self.job_id, self.task_index))

    @property
    def trace_key(self) -> str:
        return trace_key(self.job_id, self.task_index)

    def to_bytes(self) -> bytes:
        flags = (_FLAG_INLINE if self.args_ref is None else 0) | (_FLAG_CHUNKED if self.chunked else 0)
        args = self.args_blob if self.args_ref is None else self.args_ref.encode()
        return _DESC_HEAD.pack(1, flags, self.task_index, self.enqueue_time) + pack_fields(
            self.job_id.encode(), self.function_name.encode(), self.result_key.encode(), args
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "TaskDescriptor":
        version, flags, index, enqueue_time = _DESC_HEAD.unpack_from(data, 0)
        if version != 1:
            raise ValueError(f"unsupported descriptor version {version}")
        job_id, fn, rkey, args = unpack_fields(data, _DESC_HEAD.size)
        inline = bool(flags & _FLAG_INLINE)
        return cls(
            job_id=job_id.decode(),
            task_index=index,
            function_name=fn.decode(),
            args_blob=args if inline else b"",
            args_ref=None if inline else args.decode(),
            chunked=bool(flags & _FLAG_CHUNKED),
            enqueue_time=enqueue_time,
            result_key=rkey.decode(),
        )


@dataclass(frozen=True)
class PoolWorkerSpec:
    pool_id: str
    queue_key: str
    exits_key: str
    initializer: str = ""
    initargs: bytes = b""

    def to_bytes(self) -> bytes:
        return pack_fields(
            self.pool_id.encode(), self.queue_key.encode(), self.exits_key.encode(), self.initializer.encode(), self.initargs
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "PoolWorkerSpec":
        pool_id, queue_key, exits_key, initializer, initargs = unpack_fields(data)
        return cls(pool_id.decode(), queue_key.decode(), exits_key.decode(), initializer.decode(), initargs)


def task_message(desc: TaskDescriptor) -> bytes:
    return bytes([INVOKE_TASK]) + desc.to_bytes()


def pool_worker_message(spec: PoolWorkerSpec) -> bytes:
    return bytes([INVOKE_POOL_WORKER]) + spec.to_bytes()


def queue_task(desc: TaskDescriptor) -> bytes:
    return bytes([QUEUE_TASK]) + desc.to_bytes()


def queue_sentinel(pool_id: str) -> bytes:
    return bytes([QUEUE_SENTINEL]) + uuid.UUID(hex=pool_id).bytes


# -------------------------------------------------------------- results


def ok_record(value) -> bytes:
    return bytes([STATUS_OK]) + pickle.dumps(value, protocol=pickle.HIGHEST_PROTOCOL)


def error_record(message: str, traceback_text: str = "") -> bytes:
    return bytes([STATUS_ERROR]) + pack_fields(message.encode(), traceback_text.encode())


@dataclass(frozen=True)
class ResultRecord:
    ok: bool
    payload: bytes
    message: str = ""
    traceback: str = ""

    def value(self):
        return pickle.loads(self.payload)


def parse_record(data: bytes) -> ResultRecord:
    status = data[0]
    if status == STATUS_OK:
        return ResultRecord(True, data[1:])
    if status == STATUS_ERROR:
        message, tb = unpack_fields(data, 1)
        return ResultRecord(False, b"", message.decode(errors="replace"), tb.decode(errors="replace"))
    raise ValueError(f"unknown result status {status}")


@dataclass(frozen=True)
class TaskTrace:
    """Worker-side timestamps (wall clock, seconds) for one task."""

    start: float
    setup_end: float
    end: float
    worker_id: str = ""

    def to_bytes(self) -> bytes:
        return _TRACE.pack(self.start, self.setup_end, self.end) + pack_fields(self.worker_id.encode())

    @classmethod
    def from_bytes(cls, data: bytes) -> "TaskTrace":
        start, setup_end, end = _TRACE.unpack_from(data, 0)
        (worker,) = unpack_fields(data, _TRACE.size)
        return cls(start, setup_end, end, worker.decode())


def dumps_args(args: tuple, kwargs: dict | None = None) -> bytes:
    return pickle.dumps((tuple(args), dict(kwargs or {})), protocol=pickle.HIGHEST_PROTOCOL)
