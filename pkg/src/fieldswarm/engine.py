"""Closed-loop simulation engine: perceive (rebuild potentials), plan (evolve
the guidance field), execute (step UAVs), service tasks, advance the world.

Each step runs a fixed stage order; the order is part of the contract:

1. drain pending injected commands into the task set
2. rebuild the potential lattices from active tasks
3. advance the velocity field ceil(1/dt_field) substeps
4. update UAV capabilities
5. step all UAVs synchronously against the published field and roster
6. service task urgencies
7. advance entities and traffic lights
8. publish an immutable snapshot

A command queued while step s is current first influences the potential at
step s+1's snapshot. Strategies that never read the guidance field skip its
evolution (stage 3) and get their potential lattices rebuilt lazily when a
snapshot needs them; everything observable is unchanged.

The engine is single-writer: only run()/step() mutate state, and a fixed seed
makes the whole trace byte-reproducible.
"""

from __future__ import annotations

import math
import queue
from dataclasses import dataclass, field as dc_field

import numpy as np

from .agents import Uav, update_capability
from .baselines import make_strategy, run_strategy_step
from .field import FieldGrid, FieldParams, step_velocity, task_force
from .geometry import WorldMap, is_obstacle, step_entities
from .metrics import MetricsReport, RunTrace, UavRecord, compute_metrics
from .scenario import Scenario, load_scenario
from .tasks import TASK_TYPES, Task, TaskSet, inject_task, service_tick

DEFAULT_T_MAX = 2000


class EngineError(RuntimeError):
    """Invariant breach during a run; carries the diagnostic snapshot."""

    def __init__(self, message: str, snapshot: "Snapshot | None" = None):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass(frozen=True)
class SimConfig:
    scenario: str | dict
    strategy: str = "coordfield"
    strategy_params: dict = dc_field(default_factory=dict)
    field_params: FieldParams = dc_field(default_factory=FieldParams)
    t_max: int = DEFAULT_T_MAX
    snapshot_stride: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")


@dataclass(frozen=True)
class Snapshot:
    """Immutable per-step publication of the whole simulation state."""

    step: int
    world: WorldMap
    tasks: TaskSet
    uavs: tuple[Uav, ...]
    field: FieldGrid
    metrics_so_far: dict

    def phi_downsampled(self, stride: int = 4) -> dict:
        out = {}
        for ttype, arr in self.field.phi.items():
            sub = arr[::stride, ::stride]
            out[ttype] = {
                "stride": stride,
                "shape": list(sub.shape),
                "values": [[round(float(v), 6) for v in row] for row in sub],
            }
        return out


class Engine:
    def __init__(self, config: SimConfig):
        self.config = config
        scenario = (
            config.scenario
            if isinstance(config.scenario, Scenario)
            else load_scenario(config.scenario)
        )
        self.world = scenario.world
        self.tasks = scenario.tasks
        self.uavs = list(scenario.uavs)
        strategy_name = config.strategy or scenario.strategy or "coordfield"
        params = dict(scenario.strategy_params or {})
        params.update(config.strategy_params or {})
        self.strategy = make_strategy(strategy_name, params, config.seed)
        self.strategy_name = strategy_name

        config.field_params.check_stability(self.world.cell_size)
        self.field = FieldGrid.empty(
            self.world.obstacle_mask, self.world.cell_size, config.field_params
        )
        self.n_sub = math.ceil(1.0 / config.field_params.dt_field)
        # Extra substeps after a refresh so the recalculated field is
        # immediately strong enough to follow.
        self.warm_sub = 5 * self.n_sub
        self._active_ids: frozenset = frozenset(
            t.id for t in self.tasks.active_tasks()
        )
        self._needs_refresh = True
        self.step_index = 0
        self._queue: queue.Queue = queue.Queue()
        self._task_counter = len(self.tasks)
        self._phi_step = -1  # step at which phi was last rebuilt
        self.trace = RunTrace(
            strategy=strategy_name,
            seed=config.seed,
            uav_ids=tuple(u.id for u in self.uavs),
        )
        for t in self.tasks:
            self.trace.injected.append((0, t.id, t.injected_weight))
        # Running gauges so per-step snapshots stay O(roster + tasks).
        self._credits = {u.id: 0 for u in self.uavs}
        self._busy_sum = 0.0
        self._injected_weight = sum(t.injected_weight for t in self.tasks)
        self._n_injected = len(self.tasks)
        self._n_completed = 0

    # ------------------------------------------------------------------ #
    # command injection

    def inject_command(self, cmd: dict) -> None:
        """Queue a task-injection wire message: {"cmd": "inject", "x", "y",
        "w", "sigma", "type"}. Thread-safe; drained at the next step."""
        self._queue.put(dict(cmd))

    def inject_drafts(self, drafts: list[dict]) -> None:
        for d in drafts:
            self.inject_command({"cmd": "inject", **d})

    def _drain_queue(self) -> None:
        while True:
            try:
                cmd = self._queue.get_nowait()
            except queue.Empty:
                return
            if cmd.get("cmd") != "inject":
                raise EngineError(f"unknown command {cmd.get('cmd')!r}")
            task = Task(
                id=f"t{self._task_counter:04d}",
                x=float(cmd["x"]),
                y=float(cmd["y"]),
                weight=float(cmd["w"]),
                sigma=float(cmd.get("sigma", 25.0)),
                task_type=str(cmd["type"]),
                created_at=self.step_index,
            )
            self.tasks = inject_task(self.tasks, task, self.world)
            self._task_counter += 1
            self.trace.injected.append((self.step_index, task.id, task.injected_weight))
            self._injected_weight += task.injected_weight
            self._n_injected += 1

    # ------------------------------------------------------------------ #
    # stepping

    def _ensure_phi(self) -> None:
        if self._phi_step != self.step_index:
            self.field = self.field.with_phi(self.tasks)
            self._phi_step = self.step_index

    def _check_invariants(self) -> None:
        for u in self.uavs:
            if is_obstacle(self.world, u.x, u.y):
                raise EngineError(
                    f"uav {u.id} on obstacle at ({u.x:.3f}, {u.y:.3f})",
                    self.snapshot(),
                )
            if u.speed() > self.config.field_params.v_max + 1e-9:
                raise EngineError(f"uav {u.id} exceeds v_max", self.snapshot())
        for t in self.tasks:
            if t.weight < 0:
                raise EngineError(f"task {t.id} negative weight", self.snapshot())

    def step(self) -> Snapshot:
        """Advance one step through the fixed stage order and publish."""
        self.advance()
        return self.snapshot()

    def advance(self) -> None:
        """The stage machinery of step() without building the publication;
        headless runs read the trace instead of per-step snapshots. Any
        component invariant violation aborts with a diagnostic snapshot."""
        try:
            self._advance_stages()
        except EngineError:
            raise
        except ValueError as exc:
            raise EngineError(f"invariant breach: {exc}", self._safe_snapshot()) from exc

    def _safe_snapshot(self):
        try:
            return self.snapshot()
        except Exception:
            return None

    def _advance_stages(self) -> None:
        self.step_index += 1
        self._drain_queue()
        active_ids = frozenset(t.id for t in self.tasks.active_tasks())
        if active_ids != self._active_ids:
            # The active-task set changed: the guidance field is recalculated
            # from rest instead of keeping momentum toward stale targets.
            self._active_ids = active_ids
            self._needs_refresh = True
        if self.strategy.uses_field:
            self._ensure_phi()
            p = self.config.field_params
            stencil = self.field.gradient_stencil
            forces = {
                t: task_force(
                    self.field.phi[t], self.field.mask, self.world.cell_size, p.k, stencil
                )
                for t in TASK_TYPES
            }
            n_sub = self.n_sub
            if self._needs_refresh:
                self.field = FieldGrid(
                    mask=self.field.mask,
                    cell_size=self.field.cell_size,
                    params=self.field.params,
                    phi=self.field.phi,
                    stencil=self.field.stencil,
                )
                n_sub += self.warm_sub
                self._needs_refresh = False
            for _ in range(n_sub):
                self.field = step_velocity(self.field, forces=forces)
        self.uavs = [update_capability(u, self.tasks) for u in self.uavs]
        self.uavs = run_strategy_step(
            self.strategy,
            self.world,
            self.tasks,
            self.uavs,
            dt=1.0,
            field=self.field,
            step=self.step_index - 1,
        )
        before = {t.id: t.active for t in self.tasks}
        self.tasks = service_tick(self.tasks, self.uavs, dt=1.0, step=self.step_index)
        for t in self.tasks:
            if before.get(t.id) and not t.active:
                self.trace.completed.append((self.step_index, t.id, t.credited_uavs))
                self._n_completed += 1
                for uid in t.credited_uavs:
                    if uid in self._credits:
                        self._credits[uid] += 1
        if self.world.entities or self.world.traffic_lights:
            self.world = step_entities(self.world, 1.0)

        self.trace.steps = self.step_index
        self.trace.records.append(
            (
                self.step_index,
                tuple(
                    UavRecord(u.id, u.x, u.y, u.vx, u.vy, u.status, u.capability)
                    for u in self.uavs
                ),
            )
        )
        if self.uavs:
            busy = sum(1 for u in self.uavs if u.status in ("engaged", "servicing"))
            self._busy_sum += busy / len(self.uavs)
        self._check_invariants()

    def snapshot(self) -> Snapshot:
        if not self.strategy.uses_field:
            self._ensure_phi()
        self.trace.final_tasks = self.tasks
        metrics = self._metrics_so_far()
        return Snapshot(
            step=self.step_index,
            world=self.world,
            tasks=self.tasks,
            uavs=tuple(self.uavs),
            field=self.field,
            metrics_so_far=metrics,
        )

    def _metrics_so_far(self) -> dict:
        cr = 1.0 if self._n_injected == 0 else self._n_completed / self._n_injected
        if self._injected_weight <= 0:
            ce = 1.0
        else:
            remaining = self.tasks.total_remaining_weight()
            ce = min(1.0, max(0.0, 1.0 - remaining / self._injected_weight))
        counts = np.array(list(self._credits.values()), dtype=float)
        tlb = float(np.std(counts)) if len(counts) else 0.0
        uur = self._busy_sum / self.step_index if self.step_index else 0.0
        return {"cr": cr, "ce": ce, "tlb": tlb, "uur": uur}

    def done(self) -> bool:
        if self.step_index >= self.config.t_max:
            return True
        return (
            len(self.tasks) > 0
            and self.tasks.all_complete()
            and self._queue.empty()
        )

    def run(self) -> tuple[RunTrace, MetricsReport]:
        """Step until t_max or until every task completes."""
        while not self.done():
            self.advance()
        self.trace.final_tasks = self.tasks
        return self.trace, compute_metrics(self.trace)


def run_simulation(config: SimConfig) -> tuple[RunTrace, MetricsReport]:
    return Engine(config).run()
