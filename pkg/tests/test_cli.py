import os
import signal
import subprocess
import sys

import pytest

from faasproc.bench import tasks
from faasproc.faas import DaemonBackend
from faasproc.faas.daemon import DAEMONS_KEY
from faasproc.orchestrator import Orchestrator
from faasproc.store import StoreClient

TIMEOUT = 30


def spawn(*args):
    return subprocess.Popen(
        [sys.executable, "-c", "import sys; from faasproc.cli import %s as m; sys.exit(m())" % args[0], *args[1:]],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )


def stop(proc):
    proc.send_signal(signal.SIGTERM)
    try:
        return proc.wait(TIMEOUT)
    except subprocess.TimeoutExpired:
        proc.kill()
        raise


@pytest.fixture
def store_proc():
    proc = spawn("store_main", "--bind", "127.0.0.1:0", "--sweep-interval-ms", "50")
    line = proc.stdout.readline()
    assert line.startswith("listening on "), proc.stderr.read()
    yield proc, line.split()[-1]
    if proc.poll() is None:
        stop(proc)


def test_store_serves_and_stops_cleanly(store_proc):
    proc, addr = store_proc
    with StoreClient(addr) as c:
        assert c.ping() == b"PONG"
        c.push_tail("q", b"x")
        assert c.list_len("q") == 1
    assert stop(proc) == 0


def test_worker_runs_tasks_and_deregisters(store_proc):
    _, addr = store_proc
    worker = spawn("worker_main", "--store", addr, "--concurrency", "3", "--registry", "faasproc.bench.tasks")
    try:
        line = worker.stdout.readline()
        assert "serving" in line and "3 slots" in line, worker.stderr.read()
        with StoreClient(addr) as c:
            backend = DaemonBackend(c)
            orch = Orchestrator(c, backend, poll_interval=0.01)
            assert orch.map(tasks.double, range(10)) == [2 * i for i in range(10)]
            backend.close()
            assert stop(worker) == 0
            assert c.hash_get_all(DAEMONS_KEY) == {}
    finally:
        if worker.poll() is None:
            worker.kill()


def test_bench_against_external_daemons(store_proc):
    _, addr = store_proc
    worker = spawn("worker_main", "--store", addr, "--concurrency", "8", "--registry", "faasproc.bench.tasks")
    try:
        assert "serving" in worker.stdout.readline()
        out = subprocess.run(
            ["faasproc-bench", "sort", "--backend", "daemons", "--store", addr, "--length", "300", "--workers", "3"],
            capture_output=True, text=True, timeout=120,
        )
        assert out.returncode == 0, out.stderr
        assert out.stdout.count("\n") >= 4
    finally:
        stop(worker)


def test_worker_requires_network_store():
    env = {k: v for k, v in os.environ.items() if k != "FAASPROC_STORE_ADDR"}
    proc = subprocess.run(["faasproc-worker"], capture_output=True, text=True, env=env, timeout=TIMEOUT)
    assert proc.returncode == 2 and "--store" in proc.stderr


def test_worker_unreachable_store():
    proc = subprocess.run(["faasproc-worker", "--store", "127.0.0.1:1"], capture_output=True, text=True, timeout=TIMEOUT)
    assert proc.returncode == 2


def test_store_bad_bind():
    proc = subprocess.run(["faasproc-store", "--bind", "256.0.0.1:1"], capture_output=True, text=True, timeout=TIMEOUT)
    assert proc.returncode == 2
