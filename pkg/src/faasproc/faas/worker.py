"""The generic worker: what runs inside every (simulated or real) function."""

from __future__ import annotations

import logging
import pickle
import time
import traceback
import uuid
from dataclasses import dataclass

from .. import context
from ..errors import FaasprocError, Timeout
from ..registry import Registry, default_registry
from ..task import (
    INVOKE_POOL_WORKER,
    INVOKE_TASK,
    QUEUE_SENTINEL,
    PoolWorkerSpec,
    TaskDescriptor,
    TaskTrace,
    error_record,
    ok_record,
)

logger = logging.getLogger(__name__)

ARGS_BUCKET = "faasproc-jobs"
RESULT_TTL = 3600.0


@dataclass
class WorkerEnv:
    store: object
    blobs: object
    registry: Registry = default_registry
    worker_id: str = ""
    setup_delay: float = 0.0
    result_delay: float = 0.0
    max_execution: float | None = None
    result_ttl: float = RESULT_TTL


def worker_run(message: bytes, env: WorkerEnv) -> None:
    """Execute one invocation payload: a single task or a pool worker loop."""
    tag, body = message[0], message[1:]
    if tag == INVOKE_TASK:
        run_task(TaskDescriptor.from_bytes(body), env, setup_delay=env.setup_delay)
    elif tag == INVOKE_POOL_WORKER:
        run_pool_worker(PoolWorkerSpec.from_bytes(body), env)
    else:
        raise FaasprocError(f"unknown invocation tag 0x{tag:02x}")


def run_task(desc: TaskDescriptor, env: WorkerEnv, setup_delay: float = 0.0) -> None:
    start = time.time()
    setup_end = None
    try:
        if setup_delay:
            time.sleep(setup_delay)
        fn = env.registry.get(desc.function_name)
        blob = desc.args_blob if desc.args_ref is None else env.blobs.get(ARGS_BUCKET, desc.args_ref)
        with context.use(env.store, env.blobs), context.adopting():
            payload = pickle.loads(blob)
            setup_end = time.time()
            if desc.chunked:
                value = [fn(*args, **kwargs) for args, kwargs in payload]
            else:
                args, kwargs = payload
                value = fn(*args, **kwargs)
            # Pickle before the adopted handles are dropped so any handle in
            # the result takes its own reference first.
            record = ok_record(value)
        end = time.time()
        if env.max_execution is not None and end - start > env.max_execution:
            record = error_record(f"execution time limit of {env.max_execution}s exceeded")
    except BaseException as exc:  # noqa: BLE001 - every failure becomes an error record
        end = time.time()
        record = error_record(f"{type(exc).__name__}: {exc}", traceback.format_exc())
    trace = TaskTrace(start, setup_end or end, end, env.worker_id)
    publish(desc, record, trace, env)


def publish(desc: TaskDescriptor, record: bytes, trace: TaskTrace, env: WorkerEnv) -> None:
    if env.result_delay:
        time.sleep(env.result_delay)
    # Expiry is armed first so the keys are born with their TTL.
    env.store.batch(
        [
            ("key_expire", (desc.trace_key, env.result_ttl)),
            ("push_tail", (desc.trace_key, trace.to_bytes())),
            ("key_expire", (desc.result_key, env.result_ttl)),
            ("push_tail", (desc.result_key, record)),
        ]
    )


def run_pool_worker(spec: PoolWorkerSpec, env: WorkerEnv) -> None:
    """Long-lived pool worker: run the initializer, then drain the job queue."""
    own_sentinel = uuid.UUID(hex=spec.pool_id).bytes
    with context.use(env.store, env.blobs), context.adopting():
        if env.setup_delay:
            time.sleep(env.setup_delay)
        if spec.initializer:
            try:
                args, kwargs = pickle.loads(spec.initargs)
                env.registry.get(spec.initializer)(*args, **kwargs)
            except Exception:
                logger.exception("pool %s: initializer %s failed", spec.pool_id, spec.initializer)
        while True:
            try:
                message = env.store.pop_head_blocking(spec.queue_key)
            except Timeout:
                continue
            if message[0] == QUEUE_SENTINEL:
                if message[1:] == own_sentinel:
                    env.store.counter_add(spec.exits_key, 1)
                    return
                logger.warning("pool %s: ignoring foreign sentinel", spec.pool_id)
                continue
            run_task(TaskDescriptor.from_bytes(message[1:]), env)
