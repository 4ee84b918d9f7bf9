"""Task lifecycle and urgency-decay semantics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldswarm.agents import Uav
from fieldswarm.tasks import (
    KAPPA_SERVICE,
    Task,
    TaskSet,
    W_EPSILON,
    inject_task,
    service_tick,
)


def task(id="t0", x=5.0, y=5.0, w=1.0, sigma=10.0, ttype="patrol", **kw):
    return Task(id=id, x=x, y=y, weight=w, sigma=sigma, task_type=ttype, **kw)


def uav_at(x, y, ttype="patrol", id="u0"):
    return Uav(id=id, uav_type=ttype, x=x, y=y)


class TestInject:
    def test_append_to_empty(self):
        ts = inject_task(TaskSet(), task())
        assert len(ts) == 1
        assert ts.get("t0").active

    def test_duplicate_id_rejected(self):
        ts = inject_task(TaskSet(), task())
        with pytest.raises(ValueError, match="duplicate"):
            inject_task(ts, task())

    def test_round_trip_fields(self):
        ts = inject_task(TaskSet(), task(id="t7", x=300.0, y=400.0, w=5.0, sigma=25.0))
        t = ts.get("t7")
        assert (t.x, t.y, t.weight, t.sigma) == (300.0, 400.0, 5.0, 25.0)
        assert t.task_type == "patrol"
        assert t.state == "active"

    def test_sorted_by_id(self):
        ts = TaskSet()
        for tid in ("t2", "t0", "t1"):
            ts = inject_task(ts, task(id=tid))
        assert [t.id for t in ts] == ["t0", "t1", "t2"]

    def test_invalid_weight_and_sigma(self):
        with pytest.raises(ValueError):
            task(w=-1.0)
        with pytest.raises(ValueError):
            task(sigma=0.0)


class TestServiceTick:
    def test_no_uav_in_radius_is_noop(self):
        ts = inject_task(TaskSet(), task(w=1.0))
        out = service_tick(ts, [uav_at(50.0, 50.0)], dt=1.0)
        assert out.get("t0").weight == 1.0

    def test_single_matched_uav_decay(self):
        ts = inject_task(TaskSet(), task(w=1.0))
        out = service_tick(ts, [uav_at(5.0, 5.0)], dt=1.0)
        assert out.get("t0").weight == pytest.approx(1.0 - KAPPA_SERVICE)

    def test_two_uavs_clamp_to_complete(self):
        ts = inject_task(TaskSet(), task(w=0.2))
        uavs = [uav_at(5.0, 5.0, id="u0"), uav_at(6.0, 5.0, id="u1")]
        out = service_tick(ts, uavs, dt=1.0, step=17)
        t = out.get("t0")
        # oracle: max(0, w - n * kappa * dt) = max(0, 0.2 - 2*0.5) = 0
        assert t.weight == 0.0
        assert t.state == "complete"
        assert t.completed_at == 17
        assert t.credited_uavs == ("u0", "u1")

    def test_type_mismatch_does_not_service(self):
        ts = inject_task(TaskSet(), task(w=1.0, ttype="tracking"))
        out = service_tick(ts, [uav_at(5.0, 5.0, ttype="patrol")], dt=1.0)
        assert out.get("t0").weight == 1.0

    def test_completed_task_stays_complete(self):
        ts = inject_task(TaskSet(), task(w=0.1))
        out = service_tick(ts, [uav_at(5.0, 5.0)], dt=1.0)
        assert not out.get("t0").active
        out2 = service_tick(out, [uav_at(5.0, 5.0)], dt=1.0)
        assert not out2.get("t0").active
        assert out2.get("t0").weight == 0.0

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            service_tick(TaskSet(), [], dt=0.0)

    @given(
        weights=st.lists(st.floats(0.0, 10.0), min_size=1, max_size=6),
        n_uavs=st.integers(0, 5),
        dt=st.floats(0.1, 2.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_total_weight_nonincreasing(self, weights, n_uavs, dt):
        ts = TaskSet()
        for i, w in enumerate(weights):
            ts = inject_task(ts, task(id=f"t{i}", w=w, x=float(i * 3), y=0.0))
        uavs = [uav_at(float(i * 2), 0.0, id=f"u{i}") for i in range(n_uavs)]
        before = ts.total_remaining_weight()
        after = service_tick(ts, uavs, dt=dt).total_remaining_weight()
        assert after <= before + 1e-12

    @given(perm_seed=st.integers(0, 1000))
    @settings(max_examples=30, deadline=None)
    def test_permutation_invariant_in_uav_order(self, perm_seed):
        rng = np.random.default_rng(perm_seed)
        ts = TaskSet()
        for i in range(4):
            ts = inject_task(ts, task(id=f"t{i}", w=2.0, x=float(i * 4), y=0.0))
        uavs = [uav_at(float(rng.uniform(0, 14)), float(rng.uniform(0, 4)), id=f"u{i}") for i in range(5)]
        shuffled = list(uavs)
        rng.shuffle(shuffled)
        a = service_tick(ts, uavs, dt=1.0, step=3)
        b = service_tick(ts, shuffled, dt=1.0, step=3)
        assert a == b


def test_weight_epsilon_boundary():
    ts = inject_task(TaskSet(), task(w=KAPPA_SERVICE + W_EPSILON / 2))
    out = service_tick(ts, [uav_at(5.0, 5.0)], dt=1.0)
    t = out.get("t0")
    assert t.state == "complete"
    assert t.weight == 0.0
