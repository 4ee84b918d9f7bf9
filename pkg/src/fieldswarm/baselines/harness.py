"""Uniform strategy harness so metrics compare like for like.

The coordination field and the centralized optimizers run behind the same
interface: given the world, the task set, and the roster, produce the next
roster state for one step. Servicing semantics stay identical across
strategies; only allocation and movement differ. Centralized strategies
re-assign every `reassign_interval` steps and move each UAV along its
planned shortest path at v_max.
"""

from __future__ import annotations

import math

from ..agents import Uav, status_for, step_uav
from ..field import FieldGrid, vortex_context
from ..geometry import WorldMap
from ..tasks import TaskSet
from .cost import build_cost_matrix, decode_scores, vector_to_assignment
from .optimizers import assign_aco, assign_gwo, assign_woa
from .planner import GridPathPlanner

STRATEGY_NAMES = ("coordfield", "aco", "gwo", "woa", "astar")

REASSIGN_INTERVAL = 20


class AllocationStrategy:
    """Base strategy: deterministic for a fixed (world, tasks, roster, seed)."""

    name = "base"

    def __init__(self, params: dict | None = None, seed: int = 0):
        self.params = dict(params or {})
        self.rng_seed = seed

    def step_uavs(
        self,
        world: WorldMap,
        tasks: TaskSet,
        uavs: list[Uav],
        dt: float,
        field: FieldGrid | None = None,
        step: int = 0,
    ) -> list[Uav]:
        raise NotImplementedError

    @property
    def uses_field(self) -> bool:
        return False


class CoordFieldStrategy(AllocationStrategy):
    """Decentralized allocation: every UAV follows the guidance field plus
    the vortex repulsion of its peers."""

    name = "coordfield"

    @property
    def uses_field(self) -> bool:
        return True

    def step_uavs(self, world, tasks, uavs, dt, field=None, step=0):
        if field is None:
            raise ValueError("coordfield strategy needs the field snapshot")
        ctx = vortex_context(field, uavs)
        return [step_uav(u, field, [], dt, tasks, ctx=ctx) for u in uavs]


class CentralizedStrategy(AllocationStrategy):
    """Assign-then-travel harness shared by the classical optimizers."""

    name = "centralized"

    def __init__(self, params=None, seed=0):
        super().__init__(params, seed)
        self.reassign_interval = int(self.params.pop("reassign_interval", REASSIGN_INTERVAL))
        self._planner: GridPathPlanner | None = None
        self._routes: dict[str, list[tuple[float, float]]] = {}
        self._assignment = None
        self._call = 0

    def _assign(self, world, tasks, uavs):
        raise NotImplementedError

    def planner_for(self, world: WorldMap) -> GridPathPlanner:
        if self._planner is None or self._planner.world is not world:
            self._planner = GridPathPlanner(world)
        return self._planner

    def step_uavs(self, world, tasks, uavs, dt, field=None, step=0):
        planner = self.planner_for(world)
        if self._call % self.reassign_interval == 0:
            self._assignment = self._assign(world, tasks, uavs)
            self._routes = {}
            task_by_id = {t.id: t for t in tasks}
            for uav_id, task_id in self._assignment.pairs:
                t = task_by_id[task_id]
                u = next(x for x in uavs if x.id == uav_id)
                if u.uav_type != t.task_type:
                    # Nothing useful to do there: a mismatched UAV cannot
                    # service the task, so it holds position instead.
                    continue
                route = planner.path((u.x, u.y), (t.x, t.y))
                self._routes[uav_id] = route or []
        self._call += 1

        v_max = field.params.v_max if field is not None else 3.0
        out = []
        for u in uavs:
            route = self._routes.get(u.id, [])
            x, y = u.x, u.y
            budget = v_max * dt
            while budget > 1e-12 and route:
                tx, ty = route[0]
                d = math.hypot(tx - x, ty - y)
                if d <= budget:
                    x, y = tx, ty
                    route.pop(0)
                    budget -= d
                else:
                    x += (tx - x) / d * budget
                    y += (ty - y) / d * budget
                    budget = 0.0
            moved = math.hypot(x - u.x, y - u.y)
            vx, vy = (x - u.x) / dt, (y - u.y) / dt
            speed = math.hypot(vx, vy)
            out.append(
                Uav(
                    id=u.id,
                    uav_type=u.uav_type,
                    x=x,
                    y=y,
                    vx=vx,
                    vy=vy,
                    base_capability=u.base_capability,
                    capability=u.capability,
                    status=status_for(u.uav_type, x, y, speed, tasks),
                    odometer=u.odometer + moved,
                )
            )
        return out


class AcoStrategy(CentralizedStrategy):
    name = "aco"

    def _assign(self, world, tasks, uavs):
        return assign_aco(
            world, tasks, uavs, self.params, self.rng_seed, self.planner_for(world)
        )


class GwoStrategy(CentralizedStrategy):
    name = "gwo"

    def _assign(self, world, tasks, uavs):
        return assign_gwo(
            world, tasks, uavs, self.params, self.rng_seed, self.planner_for(world)
        )


class WoaStrategy(CentralizedStrategy):
    name = "woa"

    def _assign(self, world, tasks, uavs):
        return assign_woa(
            world, tasks, uavs, self.params, self.rng_seed, self.planner_for(world)
        )


class AstarStrategy(CentralizedStrategy):
    """Greedy nearest-task allocation (by path distance, UAVs in id order,
    cap-repaired) with shortest-path movement."""

    name = "astar"

    def _assign(self, world, tasks, uavs):
        active = sorted(tasks.active_tasks(), key=lambda t: t.id)
        roster = sorted(uavs, key=lambda u: u.id)
        if not active:
            from .cost import Assignment

            return Assignment(pairs=(), unassigned=())
        cost_matrix = build_cost_matrix(self.planner_for(world), roster, active)
        vec = decode_scores(cost_matrix.ravel(), cost_matrix)
        return vector_to_assignment(vec, roster, active)


_REGISTRY = {
    "coordfield": CoordFieldStrategy,
    "aco": AcoStrategy,
    "gwo": GwoStrategy,
    "woa": WoaStrategy,
    "astar": AstarStrategy,
}


def make_strategy(name: str, params: dict | None = None, seed: int = 0) -> AllocationStrategy:
    if name not in _REGISTRY:
        raise ValueError(f"unknown strategy {name!r}; choose from {STRATEGY_NAMES}")
    return _REGISTRY[name](params, seed)


def run_strategy_step(
    strategy: AllocationStrategy,
    world: WorldMap,
    tasks: TaskSet,
    uavs: list[Uav],
    dt: float,
    field: FieldGrid | None = None,
    step: int = 0,
) -> list[Uav]:
    """Advance the roster one step under the given strategy."""
    return strategy.step_uavs(world, tasks, uavs, dt, field=field, step=step)
