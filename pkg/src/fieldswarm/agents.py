"""UAV agents: sample the guidance field, integrate motion, avoid buildings.

Obstacle handling is done at the agent level by clipping the motion segment
at the first masked cell (the potential being zero inside buildings does not
by itself stop an integrator from crossing one). All UAVs in a step are
advanced against the same published field and roster snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .field import FieldGrid, compose_from_context, compose_v_new
from .geometry import clip_segment
from .tasks import SERVICE_RADIUS, TASK_TYPES, TaskSet

UAV_TYPES = TASK_TYPES
UAV_STATUSES = ("idle", "engaged", "servicing")

# Speed below which a UAV counts as idle for utilization purposes.
V_IDLE = 0.05
# Capability multiplier when the dominant nearby task type mismatches.
TYPE_MISMATCH_MULT = 0.3
# A task influences capability within this many of its sigmas.
CAPABILITY_RANGE_SIGMAS = 3.0


@dataclass(frozen=True)
class Uav:
    id: str
    uav_type: str
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0
    base_capability: float = 1.0
    capability: float = 1.0
    status: str = "idle"
    odometer: float = 0.0

    def __post_init__(self) -> None:
        if self.uav_type not in UAV_TYPES:
            raise ValueError(f"uav {self.id}: unknown type {self.uav_type!r}")
        if self.base_capability <= 0:
            raise ValueError(f"uav {self.id}: base_capability must be > 0")
        if self.status not in UAV_STATUSES:
            raise ValueError(f"uav {self.id}: invalid status {self.status!r}")

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


def status_for(
    uav_type: str, x: float, y: float, speed: float, tasks: TaskSet | None
) -> str:
    if tasks is not None:
        for t in tasks.active_tasks(uav_type):
            if math.hypot(x - t.x, y - t.y) <= SERVICE_RADIUS:
                return "servicing"
    return "engaged" if speed > V_IDLE else "idle"


def step_uav(
    uav: Uav,
    field: FieldGrid,
    others: list[Uav],
    dt: float,
    tasks: TaskSet | None = None,
    ctx=None,
) -> Uav:
    """Advance one UAV: sample the composed control velocity at its position,
    integrate with obstacle clipping, accumulate the odometer, refresh status.

    `ctx` may carry a precomputed vortex context for the whole roster so a
    synchronous sweep does not recompute every circulation per UAV.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    cs = field.cell_size
    if field.mask[int(uav.x // cs), int(uav.y // cs)]:
        raise ValueError(f"uav {uav.id}: start position is on a masked cell")

    if ctx is None:
        roster = [uav] + list(others)
        vx, vy = compose_v_new(field, roster, (uav.x, uav.y), uav.id)
    else:
        vx, vy = compose_from_context(field, ctx, (uav.x, uav.y), uav.id, uav.uav_type)
    target = (uav.x + vx * dt, uav.y + vy * dt)
    (nx, ny), blocked_axis = clip_segment(field.mask, cs, (uav.x, uav.y), target)
    if blocked_axis == 0:
        vx = 0.0
    elif blocked_axis == 1:
        vy = 0.0
    moved = math.hypot(nx - uav.x, ny - uav.y)
    speed = math.hypot(vx, vy)
    return replace(
        uav,
        x=nx,
        y=ny,
        vx=vx,
        vy=vy,
        odometer=uav.odometer + moved,
        status=status_for(uav.uav_type, nx, ny, speed, tasks),
    )


def update_capability(uav: Uav, tasks: TaskSet) -> Uav:
    """Capability = base * type match against the dominant task type nearby.

    A task is in range within CAPABILITY_RANGE_SIGMAS of its own sigma;
    dominance is by summed weight. No task in range leaves capability at
    base; a dominance tie counts as a match.
    """
    totals = dict.fromkeys(TASK_TYPES, 0.0)
    in_range = False
    for t in tasks.active_tasks():
        if math.hypot(uav.x - t.x, uav.y - t.y) <= CAPABILITY_RANGE_SIGMAS * t.sigma:
            totals[t.task_type] += t.weight
            in_range = True
    if not in_range:
        mult = 1.0
    else:
        best = max(totals.values())
        mult = 1.0 if totals[uav.uav_type] == best else TYPE_MISMATCH_MULT
    return replace(uav, capability=uav.base_capability * mult)
