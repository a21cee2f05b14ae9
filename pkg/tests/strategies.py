"""Hypothesis strategies for store commands."""

from hypothesis import strategies as st

KEYS = st.sampled_from(["a", "b", "c", "d"])
FIELDS = st.sampled_from(["x", "y", "z"])
VALUES = st.binary(max_size=8)
SMALL_INT = st.integers(-6, 6)


def command():
    """A (name, args) pair valid for both the oracle and the engine."""
    return st.one_of(
        st.tuples(st.just("push_tail"), st.tuples(KEYS, VALUES)),
        st.builds(lambda k, vs: ("push_tail", (k, *vs)), KEYS, st.lists(VALUES, min_size=1, max_size=4)),
        st.tuples(st.just("pop_head_blocking"), st.tuples(KEYS, st.just(0))),
        st.tuples(st.just("list_len"), st.tuples(KEYS)),
        st.tuples(st.just("list_index_get"), st.tuples(KEYS, SMALL_INT)),
        st.tuples(st.just("list_index_set"), st.tuples(KEYS, SMALL_INT, VALUES)),
        st.tuples(st.just("list_range"), st.tuples(KEYS, SMALL_INT, SMALL_INT)),
        st.tuples(st.just("hash_set"), st.tuples(KEYS, FIELDS, VALUES)),
        st.tuples(st.just("hash_get"), st.tuples(KEYS, FIELDS)),
        st.tuples(st.just("hash_del"), st.tuples(KEYS, FIELDS)),
        st.tuples(st.just("hash_get_all"), st.tuples(KEYS)),
        st.tuples(st.just("counter_add"), st.tuples(KEYS, st.integers(-1000, 1000))),
        st.tuples(st.just("key_delete"), st.tuples(KEYS)),
        st.tuples(st.just("key_exists"), st.tuples(KEYS)),
    )


COMMANDS = st.lists(command(), max_size=60)


def random_command(rng):
    """Seeded counterpart of :func:`command` for fixed-size sweeps."""
    key = rng.choice("abcd")
    field = rng.choice("xyz")
    value = rng.randbytes(rng.randint(0, 8))
    i, j = rng.randint(-6, 6), rng.randint(-6, 6)
    return rng.choice([
        ("push_tail", (key, value)),
        ("push_tail", (key, *[rng.randbytes(3) for _ in range(rng.randint(1, 4))])),
        ("pop_head_blocking", (key, 0)),
        ("list_len", (key,)),
        ("list_index_get", (key, i)),
        ("list_index_set", (key, i, value)),
        ("list_range", (key, i, j)),
        ("hash_set", (key, field, value)),
        ("hash_get", (key, field)),
        ("hash_del", (key, field)),
        ("hash_get_all", (key,)),
        ("counter_add", (key, rng.randint(-1000, 1000))),
        ("key_delete", (key,)),
        ("key_exists", (key,)),
    ])
