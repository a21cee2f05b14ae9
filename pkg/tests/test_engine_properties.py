import random
import threading

from hypothesis import given, settings
from hypothesis import strategies as st

from faasproc.store import StoreEngine
from oracle import Oracle, apply
from strategies import COMMANDS, KEYS, VALUES


def _engine_type(engine, key):
    entry = engine._live(key)
    return None if entry is None else entry.kind


@settings(max_examples=150, deadline=None)
@given(COMMANDS)
def test_engine_matches_sequential_oracle(commands):
    engine, oracle = StoreEngine(), Oracle()
    try:
        for name, args in commands:
            assert apply(engine, name, args) == apply(oracle, name, args), (name, args)
        for key in "abcd":
            assert engine.key_exists(key) == oracle.key_exists(key)
    finally:
        engine.close()


@settings(max_examples=100, deadline=None)
@given(COMMANDS)
def test_type_stability(commands):
    """A key's value type only changes by passing through absence."""
    engine = StoreEngine()
    try:
        for name, args in commands:
            before = {k: _engine_type(engine, k) for k in "abcd"}
            apply(engine, name, args)
            for k in "abcd":
                after = _engine_type(engine, k)
                if before[k] is not None and after is not None:
                    assert before[k] == after, (name, args)
    finally:
        engine.close()


@settings(max_examples=100, deadline=None)
@given(st.lists(st.one_of(st.tuples(st.just("push"), st.lists(VALUES, min_size=1, max_size=3)),
                          st.tuples(st.just("pop"), st.none())), max_size=80))
def test_conservation(ops):
    engine = StoreEngine()
    try:
        pushed = popped = 0
        for op, values in ops:
            if op == "push":
                engine.push_tail("q", *values)
                pushed += len(values)
            elif apply(engine, "pop_head_blocking", ("q", 0))[0] == "ok":
                popped += 1
            assert pushed - popped == engine.list_len("q")
    finally:
        engine.close()


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32))
def test_fifo_wakeup_order(n_waiters, seed):
    """Parked poppers receive pushed values in arrival order."""
    engine = StoreEngine()
    try:
        order, got = [], {}
        lock = threading.Lock()
        for i in range(n_waiters):
            def cb(value, i=i):
                with lock:
                    got[i] = value
            engine.pop_head_async("q", 5.0, cb)
            order.append(i)
        rng = random.Random(seed)
        values = [bytes([j]) for j in range(n_waiters)]
        i = 0
        while i < n_waiters:
            k = rng.randint(1, n_waiters - i)
            engine.push_tail("q", *values[i : i + k])
            i += k
        assert [got[i] for i in order] == values
    finally:
        engine.close()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.lists(VALUES, min_size=1, max_size=5), min_size=2, max_size=4))
def test_concurrent_pushes_linearize(per_thread):
    """Concurrent pushes land as an interleaving that keeps each thread's order."""
    engine = StoreEngine()
    try:
        tagged = [[bytes([t]) + v for v in vals] for t, vals in enumerate(per_thread)]
        barrier = threading.Barrier(len(tagged))

        def run(vals):
            barrier.wait()
            for v in vals:
                engine.push_tail("q", v)

        threads = [threading.Thread(target=run, args=(vals,)) for vals in tagged]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        final = engine.list_range("q", 0, -1)
        assert sorted(final) == sorted(v for vals in tagged for v in vals)
        for t, vals in enumerate(tagged):
            assert [v for v in final if v[0] == t] == vals
    finally:
        engine.close()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=1, max_size=30), st.integers(2, 6))
def test_concurrent_counter_matches_oracle_sum(deltas, n_threads):
    engine = StoreEngine()
    try:
        def run():
            for d in deltas:
                engine.counter_add("c", d)

        threads = [threading.Thread(target=run) for _ in range(n_threads)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert engine.counter_add("c", 0) == n_threads * sum(deltas)
    finally:
        engine.close()


@given(KEYS)
def test_absent_counter_reads_zero(key):
    engine = StoreEngine()
    try:
        assert engine.counter_add(key, 0) == 0
    finally:
        engine.close()
