"""A* shortest paths on the 8-connected cell lattice.

Diagonal moves cost sqrt(2) and may not cut corners: both orthogonal
neighbors of a diagonal step must be free. Expansion ties on f break toward
the smaller (y, x) cell, which makes the returned path deterministic.
"""

from __future__ import annotations

import math
from heapq import heappop, heappush

from ..geometry import WorldMap, is_obstacle

SQRT2 = math.sqrt(2.0)

# (dx, dy, step cost)
_MOVES = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT2),
    (1, -1, SQRT2),
    (-1, 1, SQRT2),
    (-1, -1, SQRT2),
]


def plan_astar(
    world: WorldMap, frm: tuple[float, float], to: tuple[float, float]
) -> list[tuple[float, float]] | None:
    """Shortest obstacle-free lattice path between two world points.

    Returns waypoints at cell centers (world units), or None when the goal is
    unreachable. Both endpoints must lie on free cells.
    """
    if is_obstacle(world, *frm):
        raise ValueError(f"plan_astar: start {frm} is masked or outside")
    if is_obstacle(world, *to):
        raise ValueError(f"plan_astar: goal {to} is masked or outside")
    h = world.cell_size
    mask = world.obstacle_mask
    width, height = mask.shape
    start = world.cell_of(*frm)
    goal = world.cell_of(*to)
    if start == goal:
        return [((start[0] + 0.5) * h, (start[1] + 0.5) * h)]

    def free(cx: int, cy: int) -> bool:
        return 0 <= cx < width and 0 <= cy < height and not mask[cx, cy]

    def heuristic(cx: int, cy: int) -> float:
        return math.hypot(cx - goal[0], cy - goal[1])

    g = {start: 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    # Heap entries (f, y, x): equal-f ties pop the smaller (y, x) cell first.
    open_heap = [(heuristic(*start), start[1], start[0])]
    closed = set()
    while open_heap:
        _, cy_, cx_ = heappop(open_heap)
        cur = (cx_, cy_)
        if cur in closed:
            continue
        if cur == goal:
            cells = [cur]
            while cur != start:
                cur = came[cur]
                cells.append(cur)
            cells.reverse()
            return [((cx + 0.5) * h, (cy + 0.5) * h) for cx, cy in cells]
        closed.add(cur)
        gc = g[cur]
        for dx, dy, cost in _MOVES:
            nx, ny = cur[0] + dx, cur[1] + dy
            if not free(nx, ny):
                continue
            if dx != 0 and dy != 0:
                # No corner cutting.
                if not (free(cur[0] + dx, cur[1]) and free(cur[0], cur[1] + dy)):
                    continue
            ng = gc + cost
            if ng < g.get((nx, ny), math.inf) - 1e-12:
                g[(nx, ny)] = ng
                came[(nx, ny)] = cur
                heappush(open_heap, (ng + heuristic(nx, ny), ny, nx))
    return None


def path_length(path: list[tuple[float, float]]) -> float:
    """Sum of straight segments between consecutive waypoints."""
    return sum(
        math.hypot(x1 - x0, y1 - y0)
        for (x0, y0), (x1, y1) in zip(path[:-1], path[1:])
    )
