"""Urban grid world: building occupancy, roads, and dynamic ground entities.

The world is a uniform lattice of square cells. Obstacles (buildings) are
axis-aligned rectangles rasterized onto the lattice; everything outside the
domain counts as an obstacle so field solvers get a uniform no-flux boundary.
Pedestrians and vehicles are simple kinematic movers that reflect off
buildings and domain edges. Traffic lights are decorative state for the
console; they do not constrain UAVs, which fly above the street grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

ENTITY_KINDS = ("pedestrian", "vehicle")

# Per-kind speed caps, cells/step.
MAX_ENTITY_SPEED = {"pedestrian": 0.5, "vehicle": 2.0}

# Traffic lights cycle green -> yellow -> red, LIGHT_PHASE_STEPS each.
LIGHT_PHASE_STEPS = 10.0
LIGHT_CYCLE_STEPS = 3.0 * LIGHT_PHASE_STEPS


@dataclass(frozen=True)
class Entity:
    """A pedestrian or vehicle moving on the street grid."""

    id: str
    kind: str
    x: float
    y: float
    vx: float
    vy: float

    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass(frozen=True)
class TrafficLight:
    x: float
    y: float
    phase: float  # accumulated steps, wraps at LIGHT_CYCLE_STEPS

    def color(self) -> str:
        idx = int(self.phase // LIGHT_PHASE_STEPS) % 3
        return ("green", "yellow", "red")[idx]


@dataclass(frozen=True)
class WorldMap:
    """Immutable snapshot of the urban map.

    obstacle_mask has shape (width, height), indexed [ix, iy], True on
    building cells. Mutation happens only by producing a new snapshot.
    """

    width: int
    height: int
    cell_size: float
    obstacle_mask: np.ndarray
    entities: tuple[Entity, ...] = ()
    traffic_lights: tuple[TrafficLight, ...] = ()

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("world dimensions must be >= 1")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if self.obstacle_mask.shape != (self.width, self.height):
            raise ValueError(
                f"obstacle_mask shape {self.obstacle_mask.shape} != "
                f"({self.width}, {self.height})"
            )
        self.obstacle_mask.setflags(write=False)

    @property
    def extent(self) -> tuple[float, float]:
        """Domain size in world units."""
        return (self.width * self.cell_size, self.height * self.cell_size)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Containing cell index; valid only for in-domain points."""
        return (int(x // self.cell_size), int(y // self.cell_size))

    def in_domain(self, x: float, y: float) -> bool:
        ex, ey = self.extent
        return 0.0 <= x < ex and 0.0 <= y < ey


def rasterize_obstacles(
    width: int, height: int, cell_size: float, rects: list[dict]
) -> np.ndarray:
    """Rasterize axis-aligned {x, y, w, h} rectangles (world units) onto cells.

    A cell is masked when its center falls inside a rectangle.
    """
    mask = np.zeros((width, height), dtype=bool)
    for rect in rects:
        x0, y0 = rect["x"], rect["y"]
        x1, y1 = x0 + rect["w"], y0 + rect["h"]
        # Cell centers at (i + 0.5) * cell_size.
        i0 = max(0, int(math.ceil(x0 / cell_size - 0.5)))
        i1 = min(width - 1, int(math.floor(x1 / cell_size - 0.5)))
        j0 = max(0, int(math.ceil(y0 / cell_size - 0.5)))
        j1 = min(height - 1, int(math.floor(y1 / cell_size - 0.5)))
        if i0 <= i1 and j0 <= j1:
            mask[i0 : i1 + 1, j0 : j1 + 1] = True
    return mask


def is_obstacle(world: WorldMap, x: float, y: float) -> bool:
    """True iff the containing cell is masked or (x, y) lies outside the domain."""
    if not world.in_domain(x, y):
        return True
    ix, iy = world.cell_of(x, y)
    return bool(world.obstacle_mask[ix, iy])


def clip_segment(
    mask: np.ndarray, cell_size: float, p0: tuple[float, float], p1: tuple[float, float]
) -> tuple[tuple[float, float], int | None]:
    """Walk the segment p0 -> p1 across the cell lattice and stop at the last
    free point before a masked (or out-of-domain) cell.

    Returns (stop_point, blocked_axis) with blocked_axis 0, 1, or None when
    the full segment is free. Assumes p0 is on a free cell.
    """
    h = cell_size
    width, height = mask.shape
    x0, y0 = p0
    x1, y1 = p1
    dx, dy = x1 - x0, y1 - y0
    if dx == 0.0 and dy == 0.0:
        return p0, None

    eps = 1e-9 * h
    ix, iy = int(x0 // h), int(y0 // h)

    def blocked(cx: int, cy: int) -> bool:
        if cx < 0 or cy < 0 or cx >= width or cy >= height:
            return True
        return bool(mask[cx, cy])

    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    inf = math.inf
    # Parametric distance to the first x/y cell boundary and per-cell deltas.
    if dx != 0.0:
        next_bx = (ix + (1 if dx > 0 else 0)) * h
        tmax_x = (next_bx - x0) / dx
        tdelta_x = h / abs(dx)
    else:
        tmax_x, tdelta_x = inf, inf
    if dy != 0.0:
        next_by = (iy + (1 if dy > 0 else 0)) * h
        tmax_y = (next_by - y0) / dy
        tdelta_y = h / abs(dy)
    else:
        tmax_y, tdelta_y = inf, inf

    while True:
        if tmax_x <= tmax_y:
            t_cross, axis = tmax_x, 0
        else:
            t_cross, axis = tmax_y, 1
        # Strict inequality: an endpoint exactly on a cell seam belongs to the
        # next cell and must still be checked against it.
        if t_cross > 1.0:
            return (x1, y1), None
        if axis == 0:
            nix, niy = ix + step_x, iy
        else:
            nix, niy = ix, iy + step_y
        if blocked(nix, niy):
            cx = x0 + t_cross * dx
            cy = y0 + t_cross * dy
            if axis == 0:
                cx -= step_x * eps
            else:
                cy -= step_y * eps
            return (cx, cy), axis
        ix, iy = nix, niy
        if axis == 0:
            tmax_x += tdelta_x
        else:
            tmax_y += tdelta_y


def _step_one_entity(world: WorldMap, ent: Entity, dt: float) -> Entity:
    x, y, vx, vy = ent.x, ent.y, ent.vx, ent.vy
    # Axis-wise advance with reflection keeps the mover off buildings without
    # ever placing it inside (or tunneling through) one.
    (x, _), blocked = clip_segment(
        world.obstacle_mask, world.cell_size, (x, y), (x + vx * dt, y)
    )
    if blocked is not None:
        vx = -vx
    (_, y), blocked = clip_segment(
        world.obstacle_mask, world.cell_size, (x, y), (x, y + vy * dt)
    )
    if blocked is not None:
        vy = -vy
    return replace(ent, x=x, y=y, vx=vx, vy=vy)


def step_entities(world: WorldMap, dt: float) -> WorldMap:
    """Advance entities by velocity * dt with reflection; cycle traffic lights."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    entities = tuple(_step_one_entity(world, e, dt) for e in world.entities)
    lights = tuple(
        replace(t, phase=(t.phase + dt) % LIGHT_CYCLE_STEPS)
        for t in world.traffic_lights
    )
    return replace(world, entities=entities, traffic_lights=lights)


def validate_world(world: WorldMap) -> None:
    """Re-check world invariants; raises ValueError on breach."""
    for ent in world.entities:
        if ent.kind not in ENTITY_KINDS:
            raise ValueError(f"entity {ent.id}: unknown kind {ent.kind!r}")
        if ent.speed() > MAX_ENTITY_SPEED[ent.kind] + 1e-12:
            raise ValueError(
                f"entity {ent.id}: speed {ent.speed():.3f} exceeds "
                f"{MAX_ENTITY_SPEED[ent.kind]} for {ent.kind}"
            )
        if is_obstacle(world, ent.x, ent.y):
            raise ValueError(
                f"entity {ent.id} at ({ent.x}, {ent.y}) is on an obstacle "
                "or outside the domain"
            )
