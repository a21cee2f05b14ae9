import random
import time

import pytest

import taskfns
from faasproc.errors import BackendUnavailable, TaskFailed, UnknownFunction
from faasproc.faas import COLD, WARM, DaemonBackend, LatencyModel, SimBackend, WorkerDaemon
from faasproc.faas.daemon import DAEMONS_KEY
from faasproc.orchestrator import Orchestrator
from faasproc.store import StoreEngine


def _orch(store, latency=None, **kw):
    backend = SimBackend(store=store, latency=latency or LatencyModel.zero())
    return Orchestrator(store, backend, poll_interval=kw.pop("poll_interval", 0.01), **kw), backend


class TestLatencyModel:
    def test_zero_dispersion_is_exact(self):
        m = LatencyModel(cold_median=1.719, warm_median=0.258)
        rng = random.Random(0)
        assert {m.startup(rng, WARM) for _ in range(20)} == {0.258}
        assert m.startup(rng, COLD) == 1.719

    def test_dispersion_is_lognormal_around_median(self):
        m = LatencyModel(warm_median=1.0, dispersion=0.5)
        rng = random.Random(3)
        xs = sorted(m.startup(rng, WARM) for _ in range(2001))
        assert 0.9 < xs[1000] < 1.1 and min(xs) > 0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            LatencyModel(dispersion=-1)

    def test_from_file(self, tmp_path):
        cfg = tmp_path / "sim.conf"
        cfg.write_text("cold_median_ms = 1719\nwarm_median_ms = 258  # warm\ndispersion = 0\ndispatch_cost_ms = 2\nseed = 9\neviction_s = 60\n")
        m = LatencyModel.from_file(cfg)
        assert (m.cold_median, m.warm_median, m.dispatch_cost, m.seed, m.eviction) == (1.719, 0.258, 0.002, 9, 60.0)
        cfg.write_text("[sim]\nbogus = 1\n")
        with pytest.raises(ValueError):
            LatencyModel.from_file(cfg)


class TestSimBackend:
    def test_echo_result(self, engine):
        orch, _ = _orch(engine)
        assert orch.map(taskfns.echo, [b"x"]) == [b"x"]

    def test_warm_startup_is_exact(self, engine):
        orch, backend = _orch(engine, LatencyModel(warm_median=0.258))
        backend.prewarm(1)
        m = orch.submit_job([(taskfns.echo, (1,))])
        orch.join(m)
        rec = m.invocations[0].record(1)
        assert rec.temperature == WARM
        assert rec.start_time - rec.dispatch_time == pytest.approx(0.258, abs=0.01)

    def test_zero_latency_start_equals_dispatch(self, engine):
        orch, _ = _orch(engine)
        m = orch.submit_job([(taskfns.echo, (1,))])
        orch.join(m)
        rec = m.invocations[0].record(1)
        assert rec.dispatch_time <= rec.start_time <= rec.end_time
        assert rec.start_time - rec.dispatch_time < 0.02

    def test_sequential_dispatch_schedule(self, engine):
        backend = SimBackend(store=engine, latency=LatencyModel(dispatch_cost=0.002))
        orch = Orchestrator(engine, backend, poll_interval=0.01)
        m = orch.submit_job([(taskfns.echo, (i,)) for i in range(100)])
        orch.join(m)
        dispatch = [inv.dispatch_time for inv in m.invocations]
        assert dispatch == sorted(dispatch)
        assert dispatch[-1] - dispatch[0] >= 0.198

    def test_cold_then_warm_reuse(self, engine):
        orch, backend = _orch(engine)
        first = orch.submit_job([(taskfns.echo, (1,))])
        orch.join(first)
        first.invocations[0].record(1)
        second = orch.submit_job([(taskfns.echo, (1,))])
        orch.join(second)
        assert first.invocations[0].record(1).temperature == COLD
        assert second.invocations[0].record(1).temperature == WARM

    def test_eviction_makes_slots_cold(self, engine):
        orch, backend = _orch(engine, LatencyModel(eviction=0.0))
        for _ in range(2):
            m = orch.submit_job([(taskfns.echo, (1,))])
            orch.join(m)
            time.sleep(0.01)
            assert m.invocations[0].record(1).temperature == COLD

    def test_deterministic_structure(self, engine):
        def run():
            latency = LatencyModel(cold_median=0.01, warm_median=0.005, dispersion=0.3, seed=4)
            backend = SimBackend(store=engine, latency=latency)
            orch = Orchestrator(engine, backend, poll_interval=0.01)
            m = orch.submit_job([(taskfns.echo, (i,)) for i in range(4)])
            orch.join(m)
            return [(r.temperature, round(r.startup_delay, 9)) for r in (inv.record(1) for inv in m.invocations)]

        assert run() == run()

    def test_failure_becomes_error_record(self, engine):
        orch, _ = _orch(engine)
        manifest = orch.submit_job([(taskfns.fail_if, (i, (2,))) for i in range(4)])
        with pytest.raises(TaskFailed) as info:
            orch.join(manifest, drain=True)
        assert info.value.index == 2 and "bad input 2" in str(info.value)

    def test_max_execution_cap(self, engine):
        orch, _ = _orch(engine, LatencyModel(max_execution=0.01))
        with pytest.raises(TaskFailed, match="time limit"):
            orch.map(taskfns.sleep, [0.05])

    def test_closed_backend(self, engine):
        backend = SimBackend(store=engine)
        backend.close()
        with pytest.raises(BackendUnavailable):
            backend.invoke([b""])


class TestDaemons:
    def test_concurrency_cap_and_exactly_once(self, engine):
        d1 = WorkerDaemon(engine, concurrency=2).start()
        d2 = WorkerDaemon(engine, concurrency=2).start()
        backend = DaemonBackend(engine)
        try:
            orch = Orchestrator(engine, backend, poll_interval=0.01)
            assert orch.map(taskfns.sleep, [0.05] * 10) == [0.05] * 10
            assert d1.completed + d2.completed == 10
            assert d1.completed > 0 and d2.completed > 0
        finally:
            backend.close()
            d1.stop()
            d2.stop()

    def test_cap_limits_concurrent_runs(self, engine):
        d = WorkerDaemon(engine, concurrency=4).start()
        backend = DaemonBackend(engine, daemons=[d.daemon_id])
        try:
            orch = Orchestrator(engine, backend, poll_interval=0.01)
            m = orch.submit_job([(taskfns.sleep, (0.1,)) for _ in range(8)])
            orch.join(m)
            recs = [inv.record(2) for inv in m.invocations]
            events = sorted([(r.start_time, 1) for r in recs] + [(r.end_time, -1) for r in recs])
            running = peak = 0
            for _, step in events:
                running += step
                peak = max(peak, running)
            assert peak <= 4
        finally:
            backend.close()
            d.stop()

    def test_idle_daemon_consumes_nothing(self, engine):
        d = WorkerDaemon(engine, concurrency=1).start()
        time.sleep(0.1)
        assert d.completed == 0 and d.status()["running"] == 0
        assert d.daemon_id in engine.hash_get_all(DAEMONS_KEY)
        d.stop()
        assert d.daemon_id not in engine.hash_get_all(DAEMONS_KEY)

    def test_no_daemons(self):
        eng = StoreEngine()
        with pytest.raises(BackendUnavailable):
            DaemonBackend(eng)
        eng.close()

    def test_unknown_function_fails_before_dispatch(self, engine):
        orch, backend = _orch(engine)
        with pytest.raises(UnknownFunction):
            orch.submit_job([(taskfns.echo, (1,)), ("not.registered", ())])
        assert engine.keys("job/") == []
