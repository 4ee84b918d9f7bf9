"""Engine loop: stage order, determinism, convergence, invariant policing."""

import json

import numpy as np
import pytest

from fieldswarm.engine import Engine, EngineError, SimConfig
from fieldswarm.field import FieldParams
from fieldswarm.geometry import is_obstacle
from fieldswarm.metrics import compute_metrics
from fieldswarm.scenario import make_bench_scenario, make_minimal_scenario


def doc_single_uav_task(distance=50.0):
    return {
        "width": 100,
        "height": 100,
        "cell_size": 1.0,
        "obstacles": [],
        "uavs": [{"id": "u0", "type": "patrol", "x": 70.0 - distance, "y": 50.0, "base_capability": 1.0}],
        "tasks": [{"x": 70.0, "y": 50.0, "w": 5.0, "sigma": 25.0, "type": "patrol"}],
        "entities": [],
        "seed": 0,
    }


class TestStep:
    def test_empty_world_trivial_metrics(self):
        cfg = SimConfig(scenario=make_minimal_scenario(), strategy="coordfield", t_max=100)
        trace, report = Engine(cfg).run()
        assert trace.steps == 100
        assert report.cr == 1.0  # vacuous: nothing injected
        assert report.ce == 1.0
        assert report.uur == 0.0
        assert report.tlb == 0.0

    def test_single_agent_converges_within_bound(self):
        """One matched UAV 50 cells out on an open map completes the task
        well inside the straight-line travel + service bound."""
        cfg = SimConfig(scenario=doc_single_uav_task(50.0), strategy="coordfield", t_max=200)
        trace, report = Engine(cfg).run()
        assert report.cr == 1.0
        # Oracle bound: travel <= distance at the field's slowest useful pace
        # plus w / kappa service ticks, comfortably under 200 at defaults.
        assert trace.steps < 200

    def test_injection_visible_next_snapshot(self):
        cfg = SimConfig(scenario=make_minimal_scenario(), strategy="coordfield", t_max=50)
        eng = Engine(cfg)
        snap0 = eng.step()
        assert len(snap0.tasks) == 0
        eng.inject_command({"cmd": "inject", "x": 5.0, "y": 5.0, "w": 3.0, "sigma": 2.0, "type": "patrol"})
        snap1 = eng.step()
        assert len(snap1.tasks) == 1
        # The potential already carries the hotspot in the same snapshot.
        phi = snap1.field.phi["patrol"]
        assert phi[5, 5] > 0.5

    def test_duplicate_free_task_ids_and_events(self):
        cfg = SimConfig(scenario=doc_single_uav_task(10.0), strategy="coordfield", t_max=150)
        eng = Engine(cfg)
        eng.inject_command({"cmd": "inject", "x": 20.0, "y": 20.0, "w": 1.0, "sigma": 10.0, "type": "tracking"})
        trace, report = eng.run()
        trace.validate()
        ids = [tid for _, tid, _ in trace.injected]
        assert len(ids) == len(set(ids)) == 2

    def test_invariant_breach_raises_engine_error(self):
        cfg = SimConfig(scenario=doc_single_uav_task(10.0), strategy="coordfield", t_max=10)
        eng = Engine(cfg)
        eng.uavs[0] = eng.uavs[0].__class__(
            **{**eng.uavs[0].__dict__, "x": -5.0}
        )
        with pytest.raises(EngineError):
            eng.step()

    def test_bad_command_rejected(self):
        cfg = SimConfig(scenario=make_minimal_scenario(), t_max=5)
        eng = Engine(cfg)
        eng.inject_command({"cmd": "explode"})
        with pytest.raises(EngineError):
            eng.step()


class TestDeterminism:
    def _run_trace_bytes(self, strategy, seed):
        doc = make_bench_scenario(seed=seed, n_tasks=10, width=120, height=120,
                                  r_lo=30.0, r_hi=40.0)
        cfg = SimConfig(
            scenario=doc,
            strategy=strategy,
            t_max=120,
            seed=seed,
            field_params=FieldParams(k=20.0, dt_field=0.5, v_max=2.0),
        )
        trace, report = Engine(cfg).run()
        payload = {
            "records": [
                [step, [[r.id, r.x, r.y, r.vx, r.vy, r.status, r.capability] for r in recs]]
                for step, recs in trace.records
            ],
            "completed": [[s, t, list(c)] for s, t, c in trace.completed],
            "metrics": report.to_dict(),
        }
        return json.dumps(payload, sort_keys=True).encode()

    @pytest.mark.parametrize("strategy", ["coordfield", "astar", "gwo"])
    def test_identical_runs_byte_identical(self, strategy):
        a = self._run_trace_bytes(strategy, 5)
        b = self._run_trace_bytes(strategy, 5)
        assert a == b

    def test_different_seeds_differ(self):
        a = self._run_trace_bytes("coordfield", 1)
        b = self._run_trace_bytes("coordfield", 2)
        assert a != b


class TestObstacleInvariants:
    @pytest.mark.parametrize("strategy", ["coordfield", "astar"])
    def test_long_run_no_uav_on_mask(self, strategy):
        doc = make_bench_scenario(seed=9, width=120, height=120, n_tasks=10,
                                  r_lo=30.0, r_hi=40.0, n_blocks=4)
        cfg = SimConfig(
            scenario=doc,
            strategy=strategy,
            t_max=2000,
            seed=9,
            field_params=FieldParams(k=20.0, dt_field=0.5, v_max=2.0),
        )
        eng = Engine(cfg)
        while not eng.done():
            eng.advance()
            for u in eng.uavs:
                assert not is_obstacle(eng.world, u.x, u.y)

    def test_odometer_consistency(self):
        cfg = SimConfig(scenario=doc_single_uav_task(30.0), strategy="coordfield", t_max=80)
        eng = Engine(cfg)
        total = 0.0
        prev = (eng.uavs[0].x, eng.uavs[0].y)
        while not eng.done():
            eng.advance()
            u = eng.uavs[0]
            total += np.hypot(u.x - prev[0], u.y - prev[1])
            prev = (u.x, u.y)
        assert eng.uavs[0].odometer == pytest.approx(total, abs=1e-9)

    def test_distance_nonincreasing_after_warmup(self):
        cfg = SimConfig(scenario=doc_single_uav_task(40.0), strategy="coordfield", t_max=300)
        eng = Engine(cfg)
        dists = []
        while not eng.done():
            eng.advance()
            u = eng.uavs[0]
            dists.append(np.hypot(u.x - 70.0, u.y - 50.0))
        settled = dists[50:]
        # Allow sub-cell wobble from interpolation while closing in.
        for a, b in zip(settled[:-1], settled[1:]):
            assert b <= a + 0.3


class TestRun:
    def test_t_max_one(self):
        cfg = SimConfig(scenario=make_minimal_scenario(), t_max=1)
        trace, _ = Engine(cfg).run()
        assert trace.steps == 1

    def test_early_exit_on_completion(self):
        cfg = SimConfig(scenario=doc_single_uav_task(5.0), strategy="coordfield", t_max=500)
        trace, report = Engine(cfg).run()
        assert report.cr == 1.0
        assert trace.steps < 100

    def test_metrics_so_far_matches_final(self):
        cfg = SimConfig(scenario=doc_single_uav_task(20.0), strategy="coordfield", t_max=150)
        eng = Engine(cfg)
        trace, report = eng.run()
        gauges = eng._metrics_so_far()
        assert gauges["cr"] == report.cr
        assert gauges["ce"] == pytest.approx(report.ce, abs=1e-12)
        assert gauges["tlb"] == pytest.approx(report.tlb, abs=1e-12)
        assert gauges["uur"] == pytest.approx(report.uur, abs=1e-12)

    def test_strategy_harness_parity(self):
        doc = make_bench_scenario(seed=3, width=120, height=120, n_tasks=10,
                                  r_lo=30.0, r_hi=40.0)
        traces = {}
        for strategy in ("coordfield", "astar"):
            cfg = SimConfig(scenario=doc, strategy=strategy, t_max=150, seed=3,
                            field_params=FieldParams(k=20.0, dt_field=0.5, v_max=2.0))
            trace, report = Engine(cfg).run()
            traces[strategy] = trace
        a, b = traces["coordfield"], traces["astar"]
        assert [e[:2] for e in a.injected] == [e[:2] for e in b.injected]
        assert compute_metrics(a).cr <= 1.0 and compute_metrics(b).cr <= 1.0


def test_snapshot_phi_downsample_shape():
    cfg = SimConfig(scenario=doc_single_uav_task(10.0), t_max=5)
    eng = Engine(cfg)
    snap = eng.step()
    down = snap.phi_downsampled(stride=10)
    assert down["patrol"]["shape"] == [10, 10]
    assert len(down["patrol"]["values"]) == 10
