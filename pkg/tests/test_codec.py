import struct

import pytest
from hypothesis import given
from hypothesis import strategies as st

from faasproc import task
from faasproc.errors import TypeMismatch
from faasproc.ipc import codec

names = st.text(min_size=1, max_size=20)


@given(
    job=names,
    index=st.integers(0, 2**32 - 1),
    fn=names,
    args=st.binary(max_size=200),
    ref=st.one_of(st.none(), names),
    chunked=st.booleans(),
    t=st.floats(allow_nan=False, allow_infinity=False),
)
def test_descriptor_round_trip(job, index, fn, args, ref, chunked, t):
    desc = task.TaskDescriptor(job, index, fn, b"" if ref else args, ref, chunked, t)
    assert task.TaskDescriptor.from_bytes(desc.to_bytes()) == desc


def test_descriptor_default_keys():
    desc = task.TaskDescriptor("j", 3, "f")
    assert desc.result_key == "job/j/task/3/result"
    assert desc.trace_key.startswith("job/j/task/3")


def test_descriptor_rejects_unknown_version():
    data = bytearray(task.TaskDescriptor("j", 0, "f").to_bytes())
    data[0] = 9
    with pytest.raises(ValueError):
        task.TaskDescriptor.from_bytes(bytes(data))


@given(names, names, names, st.text(max_size=10), st.binary(max_size=50))
def test_pool_worker_spec_round_trip(pool, queue, exits, init, initargs):
    spec = task.PoolWorkerSpec(pool, queue, exits, init, initargs)
    assert task.PoolWorkerSpec.from_bytes(spec.to_bytes()) == spec
    assert task.pool_worker_message(spec)[0] == task.INVOKE_POOL_WORKER


@given(st.recursive(st.none() | st.integers() | st.text() | st.binary(),
                    lambda inner: st.lists(inner) | st.dictionaries(st.text(), inner), max_leaves=10))
def test_ok_record_round_trip(value):
    rec = task.parse_record(task.ok_record(value))
    assert rec.ok and rec.value() == value


@given(st.text(), st.text())
def test_error_record_round_trip(message, tb):
    rec = task.parse_record(task.error_record(message, tb))
    assert not rec.ok and (rec.message, rec.traceback) == (message, tb)


def test_unknown_status_rejected():
    with pytest.raises(ValueError):
        task.parse_record(b"\x07")


@given(st.floats(0, 1e10), st.floats(0, 1e10), st.floats(0, 1e10), st.text(max_size=16))
def test_trace_round_trip(a, b, c, worker):
    tr = task.TaskTrace(a, b, c, worker)
    assert task.TaskTrace.from_bytes(tr.to_bytes()) == tr


def test_sentinel_is_distinguishable_from_task():
    pool = task.new_id()
    assert task.queue_sentinel(pool)[0] == task.QUEUE_SENTINEL
    assert task.queue_task(task.TaskDescriptor("j", 0, "f"))[0] == task.QUEUE_TASK


@given(st.lists(st.binary(max_size=30), max_size=6))
def test_fields_round_trip(fields):
    assert task.unpack_fields(task.pack_fields(*fields)) == fields


scalars = st.one_of(
    st.tuples(st.just(codec.INT64), st.integers(-(2**63), 2**63 - 1)),
    st.tuples(st.just(codec.FLOAT64), st.floats(allow_nan=False)),
    st.tuples(st.just(codec.BOOL), st.booleans()),
    st.tuples(st.just(codec.CHAR), st.binary(min_size=1, max_size=1)),
)


@given(scalars)
def test_scalar_round_trip(pair):
    tag, value = pair
    data = codec.encode(tag, value)
    assert len(data) == 1 + struct.calcsize("<" + {1: "q", 2: "d", 3: "?", 4: "c"}[tag])
    assert codec.decode(data, tag) == value


@pytest.mark.parametrize("code,tag", [("i", codec.INT64), ("d", codec.FLOAT64), ("?", codec.BOOL), ("c", codec.CHAR), ("float64", codec.FLOAT64)])
def test_typecodes(code, tag):
    assert codec.tag_for(code) == tag


def test_scalar_type_errors():
    with pytest.raises(TypeMismatch):
        codec.encode(codec.INT64, 2**63)
    with pytest.raises(TypeMismatch):
        codec.encode(codec.INT64, "x")
    with pytest.raises(TypeMismatch):
        codec.encode(codec.CHAR, b"ab")
    with pytest.raises(TypeMismatch):
        codec.decode(codec.encode(codec.INT64, 1), codec.FLOAT64)
    with pytest.raises(TypeMismatch):
        codec.decode(b"\x01\x00")
    with pytest.raises(TypeMismatch):
        codec.tag_for("z")
