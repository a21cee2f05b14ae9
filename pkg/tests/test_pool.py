import time

import pytest

import taskfns
from faasproc import Pool, Process, Value
from faasproc.errors import JoinTimeout, PoolClosed, TaskFailed, UnknownFunction


@pytest.fixture
def pool(store, sim):
    p = Pool(3, backend=sim, poll_interval=0.01)
    yield p
    p.terminate()


def test_map_results_in_order(pool):
    assert pool.map(taskfns.square, range(20)) == [i * i for i in range(20)]
    assert pool.map(taskfns.square, []) == []


def test_invocations_fixed_by_pool_size(pool):
    for _ in range(3):
        pool.map(taskfns.echo, range(10))
    assert pool.invocation_count == 3


def test_starmap_apply_and_async(pool):
    assert pool.starmap(taskfns.add, [(1, 2), (3, 4)]) == [3, 7]
    assert pool.apply(taskfns.add, (1,), {"b": 5}) == 6
    res = pool.map_async(taskfns.sleep, [0.02, 0.01])
    res.wait(5)
    assert res.ready() and res.successful() and res.get() == [0.02, 0.01]
    assert list(pool.imap(taskfns.square, [2, 3])) == [4, 9]
    assert sorted(pool.imap_unordered(taskfns.square, [2, 3])) == [4, 9]


def test_chunksize_preserves_results(pool):
    assert pool.map(taskfns.square, range(23), chunksize=5) == [i * i for i in range(23)]


def test_callbacks(pool):
    ok, err = [], []
    pool.map_async(taskfns.echo, [1], callback=ok.append).wait(5)
    r = pool.starmap_async(taskfns.fail_if, [(1, (1,))], error_callback=err.append)
    r.wait(5)
    deadline = time.monotonic() + 2
    while not (ok and err) and time.monotonic() < deadline:
        time.sleep(0.01)
    assert ok == [[1]] and isinstance(err[0], TaskFailed)
    assert not r.successful()


def test_failure_propagates(pool):
    with pytest.raises(TaskFailed, match="bad input 2"):
        pool.starmap(taskfns.fail_if, [(1, ()), (2, (2,))])
    assert pool.map(taskfns.echo, [5]) == [5]


def test_unregistered_function(pool):
    with pytest.raises(UnknownFunction):
        pool.map(lambda x: x, [1])


def test_initializer_runs_once_per_worker(store, sim):
    counter = Value("i", 0)
    with Pool(4, initializer=taskfns.init_counter, initargs=(counter,), backend=sim, poll_interval=0.01) as p:
        p.map(taskfns.echo, range(8))
        deadline = time.monotonic() + 5
        while counter.value < 4 and time.monotonic() < deadline:
            time.sleep(0.01)
    assert counter.value == 4
    assert counter.refcount() == 1


def test_close_join_consumes_one_sentinel_each(store, sim):
    p = Pool(3, backend=sim, poll_interval=0.01)
    res = p.map_async(taskfns.sleep, [0.05] * 6)
    with pytest.raises(ValueError):
        p.join()
    p.close()
    with pytest.raises(PoolClosed):
        p.map(taskfns.echo, [1])
    p.join(10)
    assert res.get(1) == [0.05] * 6
    assert p.sentinels_consumed == 3


def test_terminate_is_idempotent_and_discards_queue(store, sim):
    p = Pool(2, backend=sim, poll_interval=0.01)
    res = p.map_async(taskfns.sleep, [0.2] * 10)
    p.terminate(10)
    p.terminate()
    assert p.sentinels_consumed == 2
    with pytest.raises(Exception):
        res.get(1)


def test_pool_validates_size(store, sim):
    with pytest.raises(ValueError):
        Pool(0, backend=sim)


def test_result_get_timeout(pool):
    res = pool.apply_async(taskfns.sleep, (0.3,))
    with pytest.raises(JoinTimeout):
        res.get(0.02)
    assert res.get(5) == 0.3


class TestProcess:
    def test_join_returns_result(self, store, sim):
        p = Process(target=taskfns.add, args=(2,), kwargs={"b": 3}, backend=sim, poll_interval=0.01)
        assert p.exitcode is None and not p.is_alive()
        p.start()
        assert p.join(5) == 5 and p.exitcode == 0
        assert not p.is_alive()
        with pytest.raises(RuntimeError):
            p.start()

    def test_failure_sets_exitcode(self, store, sim):
        p = Process(target=taskfns.fail_if, args=(1, (1,)), backend=sim, poll_interval=0.01)
        p.start()
        with pytest.raises(TaskFailed):
            p.join(5)
        assert p.exitcode == 1

    def test_join_before_start(self, store, sim):
        with pytest.raises(RuntimeError):
            Process(target=taskfns.echo, args=(1,), backend=sim).join()

    def test_run_locally(self):
        assert Process(target=taskfns.square, args=(4,)).run() == 16

    def test_target_required(self):
        with pytest.raises(ValueError):
            Process()
