"""World map, entity kinematics, and scenario loading."""

import numpy as np
import pytest

from fieldswarm.geometry import (
    Entity,
    TrafficLight,
    WorldMap,
    is_obstacle,
    rasterize_obstacles,
    step_entities,
)
from fieldswarm.scenario import (
    ScenarioError,
    load_scenario,
    make_bench_scenario,
    make_city_scenario,
    make_minimal_scenario,
)


def open_world(w=10, h=10, **kw):
    return WorldMap(
        width=w, height=h, cell_size=1.0, obstacle_mask=np.zeros((w, h), dtype=bool), **kw
    )


class TestIsObstacle:
    def test_building_cell(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[3, 4] = True
        world = WorldMap(width=10, height=10, cell_size=1.0, obstacle_mask=mask)
        assert is_obstacle(world, 3.5, 4.5)

    def test_out_of_domain_counts_as_obstacle(self):
        world = open_world()
        assert is_obstacle(world, -1.0, 5.0)
        assert is_obstacle(world, 5.0, 10.0)

    def test_road_cell_is_free(self):
        world = open_world()
        assert not is_obstacle(world, 5.0, 5.0)

    def test_pure_function(self):
        world = open_world()
        assert all(is_obstacle(world, 2.2, 3.3) == is_obstacle(world, 2.2, 3.3) for _ in range(5))


class TestRasterize:
    def test_rect_covers_expected_cells(self):
        mask = rasterize_obstacles(10, 10, 1.0, [{"x": 2, "y": 3, "w": 3, "h": 2}])
        assert mask[2, 3] and mask[4, 4]
        assert not mask[1, 3] and not mask[5, 3] and not mask[2, 5]

    def test_empty_rect_list(self):
        assert not rasterize_obstacles(5, 5, 1.0, []).any()


class TestStepEntities:
    def test_simple_advance(self):
        world = open_world(
            entities=(Entity(id="e0", kind="pedestrian", x=5.0, y=5.0, vx=0.5, vy=0.0),)
        )
        out = step_entities(world, 1.0)
        assert out.entities[0].x == pytest.approx(5.5)
        assert out.entities[0].y == pytest.approx(5.0)

    def test_reflection_keeps_entity_off_buildings(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[6, :] = True  # wall at x in [6, 7)
        world = WorldMap(
            width=10,
            height=10,
            cell_size=1.0,
            obstacle_mask=mask,
            entities=(Entity(id="e0", kind="vehicle", x=5.5, y=4.5, vx=2.0, vy=0.0),),
        )
        out = step_entities(world, 1.0)
        e = out.entities[0]
        assert not is_obstacle(out, e.x, e.y)
        assert e.vx == -2.0  # reflected

    def test_nonpositive_dt_rejected(self):
        with pytest.raises(ValueError):
            step_entities(open_world(), 0.0)

    def test_no_entity_on_obstacle_after_many_random_steps(self):
        rng = np.random.default_rng(123)
        mask = rasterize_obstacles(
            30, 30, 1.0, [{"x": 5, "y": 5, "w": 8, "h": 8}, {"x": 18, "y": 12, "w": 6, "h": 10}]
        )
        ents = []
        i = 0
        while len(ents) < 12:
            x, y = float(rng.uniform(0.5, 29.5)), float(rng.uniform(0.5, 29.5))
            if mask[int(x), int(y)]:
                continue
            kind = "pedestrian" if i % 2 else "vehicle"
            cap = 0.5 if kind == "pedestrian" else 2.0
            ang = rng.uniform(0, 2 * np.pi)
            sp = rng.uniform(0.1, 1.0) * cap
            ents.append(
                Entity(id=f"e{i}", kind=kind, x=x, y=y, vx=sp * np.cos(ang), vy=sp * np.sin(ang))
            )
            i += 1
        world = WorldMap(
            width=30, height=30, cell_size=1.0, obstacle_mask=mask, entities=tuple(ents)
        )
        for _ in range(1000):
            world = step_entities(world, 1.0)
            for e in world.entities:
                assert not is_obstacle(world, e.x, e.y)

    def test_traffic_light_cycles(self):
        world = open_world(traffic_lights=(TrafficLight(x=1.0, y=1.0, phase=0.0),))
        colors = set()
        for _ in range(30):
            world = step_entities(world, 1.0)
            colors.add(world.traffic_lights[0].color())
        assert colors == {"green", "yellow", "red"}


class TestLoadScenario:
    def test_minimal_scenario(self):
        sc = load_scenario(make_minimal_scenario())
        assert sc.world.width == 10
        assert len(sc.uavs) == 1
        assert len(sc.tasks) == 0

    def test_city_scale_even_split(self):
        sc = load_scenario(make_city_scenario(n_uavs=20))
        assert sc.world.width == 1000
        patrol = [u for u in sc.uavs if u.uav_type == "patrol"]
        tracking = [u for u in sc.uavs if u.uav_type == "tracking"]
        assert len(patrol) == 10
        assert len(tracking) == 10

    def test_task_on_obstacle_rejected(self):
        doc = make_minimal_scenario()
        doc["obstacles"] = [{"x": 2, "y": 2, "w": 2, "h": 2}]
        doc["tasks"] = [{"x": 3.0, "y": 3.0, "w": 1.0, "sigma": 10.0, "type": "patrol"}]
        with pytest.raises(ScenarioError) as exc:
            load_scenario(doc)
        assert "tasks[0]" in str(exc.value)

    def test_entity_on_obstacle_rejected_with_coordinates(self):
        doc = make_minimal_scenario()
        doc["obstacles"] = [{"x": 2, "y": 2, "w": 2, "h": 2}]
        doc["entities"] = [{"kind": "pedestrian", "x": 3.0, "y": 3.0, "vx": 0.0, "vy": 0.0}]
        with pytest.raises(ScenarioError) as exc:
            load_scenario(doc)
        assert "3.0" in str(exc.value)

    def test_unknown_field_rejected(self):
        doc = make_minimal_scenario()
        doc["wifth"] = 3
        with pytest.raises(ScenarioError) as exc:
            load_scenario(doc)
        assert "wifth" in str(exc.value)

    def test_missing_field_named(self):
        with pytest.raises(ScenarioError) as exc:
            load_scenario({"width": 10})
        assert "height" in str(exc.value)

    def test_duplicate_uav_id_rejected(self):
        doc = make_minimal_scenario()
        doc["uavs"] = [
            {"id": "u0", "type": "patrol", "x": 1.0, "y": 1.0, "base_capability": 1.0},
            {"id": "u0", "type": "tracking", "x": 2.0, "y": 2.0, "base_capability": 1.0},
        ]
        with pytest.raises(ScenarioError) as exc:
            load_scenario(doc)
        assert "uavs[1].id" in str(exc.value)

    def test_bench_scenario_loads(self):
        sc = load_scenario(make_bench_scenario(seed=4))
        assert sc.world.width == 200
        assert len(sc.uavs) == 10
        assert len(sc.tasks) == 30
