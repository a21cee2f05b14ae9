import os
import sys
import threading

import pytest

from faasproc import context
from faasproc.faas import LatencyModel, SimBackend
from faasproc.objectfs import StoreBlobStore
from faasproc.store import StoreClient, StoreEngine, serve

sys.path.insert(0, os.path.dirname(__file__))


class StepClock:
    """Millisecond clock advanced by hand."""

    def __init__(self, start: float = 1_000_000.0):
        self.now = start
        self._lock = threading.Lock()

    def __call__(self) -> float:
        return self.now

    def advance(self, ms: float) -> None:
        with self._lock:
            self.now += ms


@pytest.fixture
def engine():
    eng = StoreEngine()
    yield eng
    eng.close()


@pytest.fixture
def clock():
    return StepClock()


@pytest.fixture
def stepped(clock):
    eng = StoreEngine(clock=clock, sweep_interval=3600)
    yield eng
    eng.close()


@pytest.fixture
def server():
    srv = serve("127.0.0.1:0")
    yield srv
    srv.close()


@pytest.fixture
def client(server):
    c = StoreClient(server.address)
    yield c
    c.close()


@pytest.fixture(params=["embedded", "network"])
def store(request):
    """The same store contract, embedded and over loopback TCP."""
    if request.param == "embedded":
        eng = StoreEngine()
        with context.use(eng):
            yield eng
        eng.close()
    else:
        srv = serve("127.0.0.1:0")
        c = StoreClient(srv.address)
        with context.use(c):
            yield c
        c.close()
        srv.close()


def engine_of(store):
    """The engine behind a store fixture (for key introspection)."""
    return store if isinstance(store, StoreEngine) else None


def live_keys(store, prefix="rsrc/"):
    if isinstance(store, StoreEngine):
        return store.keys(prefix)
    raise TypeError("introspection needs the engine")


@pytest.fixture
def sim(store):
    backend = SimBackend(store=store, blobs=StoreBlobStore(store), latency=LatencyModel.zero())
    yield backend
    backend.close()


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, detail = RESULTS[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
