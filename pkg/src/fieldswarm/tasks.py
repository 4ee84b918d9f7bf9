"""Task tuples, urgency decay under service, and task lifecycle.

A task is (x, y, weight, sigma, type): position, urgency weight, Gaussian
influence radius, and semantic type. Urgency decays linearly while
type-matched UAVs sit within the service radius; a task whose weight falls
to ~zero is complete and stays complete.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .geometry import WorldMap, is_obstacle

TASK_TYPES = ("patrol", "tracking")

# Urgency lost per step per servicing UAV.
KAPPA_SERVICE = 0.5
# A UAV services a matched task from within this distance (world units).
SERVICE_RADIUS = 10.0
# Weight at or below this counts as fully serviced.
W_EPSILON = 1e-3

DEFAULT_SIGMA = 25.0


@dataclass(frozen=True)
class Task:
    id: str
    x: float
    y: float
    weight: float
    sigma: float
    task_type: str
    state: str = "active"  # "active" | "complete"
    created_at: int = 0
    injected_weight: float = field(default=-1.0)
    completed_at: int | None = None
    credited_uavs: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.task_type not in TASK_TYPES:
            raise ValueError(f"task {self.id}: unknown type {self.task_type!r}")
        if self.sigma <= 0:
            raise ValueError(f"task {self.id}: sigma must be > 0")
        if self.weight < 0:
            raise ValueError(f"task {self.id}: weight must be >= 0")
        if self.injected_weight < 0:
            object.__setattr__(self, "injected_weight", self.weight)

    @property
    def active(self) -> bool:
        return self.state == "active"


@dataclass(frozen=True)
class TaskSet:
    """Immutable collection of tasks, kept sorted by id for determinism."""

    tasks: tuple[Task, ...] = ()

    def __iter__(self):
        return iter(self.tasks)

    def __len__(self) -> int:
        return len(self.tasks)

    def get(self, task_id: str) -> Task | None:
        for t in self.tasks:
            if t.id == task_id:
                return t
        return None

    def active_tasks(self, task_type: str | None = None) -> tuple[Task, ...]:
        return tuple(
            t
            for t in self.tasks
            if t.active and (task_type is None or t.task_type == task_type)
        )

    def all_complete(self) -> bool:
        return all(not t.active for t in self.tasks)

    def total_injected_weight(self) -> float:
        return sum(t.injected_weight for t in self.tasks)

    def total_remaining_weight(self) -> float:
        return sum(t.weight for t in self.tasks)


def inject_task(tasks: TaskSet, task: Task, world: WorldMap | None = None) -> TaskSet:
    """Append a new active task; rejects duplicate ids and obstacle positions."""
    if tasks.get(task.id) is not None:
        raise ValueError(f"duplicate task id {task.id!r}")
    if world is not None and is_obstacle(world, task.x, task.y):
        raise ValueError(
            f"task {task.id} at ({task.x}, {task.y}) is on an obstacle cell"
        )
    merged = sorted(tasks.tasks + (task,), key=lambda t: t.id)
    return TaskSet(tuple(merged))


def service_tick(tasks: TaskSet, uavs, dt: float, step: int = 0) -> TaskSet:
    """Decay urgency of active tasks under nearby type-matched UAVs.

    Each matched UAV within SERVICE_RADIUS removes KAPPA_SERVICE * dt weight.
    Weight clamps at 0; a task at or below W_EPSILON completes, recording the
    completion step and every UAV inside the radius at that tick (shared
    credit: the field method has no exclusive assignment to count otherwise).
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    out = []
    for t in tasks:
        if not t.active:
            out.append(t)
            continue
        servicers = sorted(
            u.id
            for u in uavs
            if u.uav_type == t.task_type
            and math.hypot(u.x - t.x, u.y - t.y) <= SERVICE_RADIUS
        )
        if not servicers:
            out.append(t)
            continue
        w = max(0.0, t.weight - KAPPA_SERVICE * len(servicers) * dt)
        if w <= W_EPSILON:
            out.append(
                replace(
                    t,
                    weight=0.0,
                    state="complete",
                    completed_at=step,
                    credited_uavs=tuple(servicers),
                )
            )
        else:
            out.append(replace(t, weight=w))
    return TaskSet(tuple(out))
