"""Grid path planning backed by goal-rooted shortest-path trees.

Centralized strategies replan for the whole roster every reassignment, so
paths are served from one Dijkstra tree per task (scipy.sparse.csgraph)
instead of a fresh A* per (UAV, task) pair. Edge weights and the
no-corner-cutting rule match plan_astar, so extracted paths have the same
lengths A* would return.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from ..geometry import WorldMap

SQRT2 = math.sqrt(2.0)


def _grid_graph(mask: np.ndarray) -> csr_matrix:
    """Sparse 8-connected adjacency of the free cells."""
    width, height = mask.shape
    n = width * height
    free = ~mask
    idx = np.arange(n).reshape(width, height)

    rows, cols, data = [], [], []

    def add_edges(dx: int, dy: int, cost: float, extra_ok=None):
        xs = slice(max(0, -dx), width - max(0, dx))
        ys = slice(max(0, -dy), height - max(0, dy))
        xt = slice(max(0, dx), width + min(0, dx) or None)
        yt = slice(max(0, dy), height + min(0, dy) or None)
        ok = free[xs, ys] & free[xt, yt]
        if extra_ok is not None:
            ok &= extra_ok
        rows.append(idx[xs, ys][ok])
        cols.append(idx[xt, yt][ok])
        data.append(np.full(int(ok.sum()), cost))

    add_edges(1, 0, 1.0)
    add_edges(0, 1, 1.0)
    for dx in (1, -1):
        for dy in (1, -1):
            xs = slice(max(0, -dx), width - max(0, dx))
            ys = slice(max(0, -dy), height - max(0, dy))
            # Corner cells for the no-corner-cutting rule.
            xc = slice(max(0, dx), width + min(0, dx) or None)
            yc = slice(max(0, dy), height + min(0, dy) or None)
            corner_ok = free[xc, ys] & free[xs, yc]
            add_edges(dx, dy, SQRT2, extra_ok=corner_ok)

    rows = np.concatenate(rows) if rows else np.array([], dtype=int)
    cols = np.concatenate(cols) if cols else np.array([], dtype=int)
    data = np.concatenate(data) if data else np.array([], dtype=float)
    return csr_matrix((data, (rows, cols)), shape=(n, n))


class GridPathPlanner:
    """Per-goal shortest-path fields over one obstacle mask, cached by goal cell."""

    def __init__(self, world: WorldMap):
        self.world = world
        self.mask = world.obstacle_mask
        self.width, self.height = self.mask.shape
        self._graph = _grid_graph(self.mask)
        self._fields: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def _node(self, cell: tuple[int, int]) -> int:
        return cell[0] * self.height + cell[1]

    def _cell(self, node: int) -> tuple[int, int]:
        return divmod(node, self.height)

    def field_for(self, goal_cell: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        """(distances, predecessors) of the tree rooted at goal_cell."""
        if goal_cell not in self._fields:
            dist, pred = dijkstra(
                self._graph,
                directed=False,
                indices=self._node(goal_cell),
                return_predecessors=True,
            )
            self._fields[goal_cell] = (dist, pred)
        return self._fields[goal_cell]

    def distance(self, frm: tuple[float, float], to: tuple[float, float]) -> float:
        """Shortest lattice path length in world units; inf when unreachable."""
        start = self.world.cell_of(*frm)
        goal = self.world.cell_of(*to)
        dist, _ = self.field_for(goal)
        return float(dist[self._node(start)]) * self.world.cell_size

    def path(
        self, frm: tuple[float, float], to: tuple[float, float]
    ) -> list[tuple[float, float]] | None:
        """Waypoints (cell centers) from frm's cell to to's cell, then the
        exact goal point; None when unreachable."""
        h = self.world.cell_size
        start = self.world.cell_of(*frm)
        goal = self.world.cell_of(*to)
        dist, pred = self.field_for(goal)
        node = self._node(start)
        if not np.isfinite(dist[node]):
            return None
        cells = [start]
        goal_node = self._node(goal)
        while node != goal_node:
            node = int(pred[node])
            cells.append(self._cell(node))
        pts = [((cx + 0.5) * h, (cy + 0.5) * h) for cx, cy in cells]
        pts.append(to)
        return pts
