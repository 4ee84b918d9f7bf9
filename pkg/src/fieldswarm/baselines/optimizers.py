"""Metaheuristic optimizers over the shared assignment objective.

All three search the same encoding: a score per (UAV, task) pair, decoded by
per-UAV argmin with cap repair. A deterministic round-robin incumbent seeds
every search, and cost ties always resolve to the lexicographically smaller
assignment (lower UAV id takes the lower task id), so a fixed seed yields a
fixed result.
"""

from __future__ import annotations

import numpy as np

from .cost import (
    Assignment,
    assignment_cost,
    better,
    build_cost_matrix,
    decode_scores,
    repair_assignment,
    seed_assignment,
    vector_to_assignment,
)
from .planner import GridPathPlanner

ACO_DEFAULTS = {"n_ants": 30, "iterations": 50, "evaporation": 0.5, "alpha": 1.0, "beta": 2.0}
GWO_DEFAULTS = {"pack_size": 20, "iterations": 60}
WOA_DEFAULTS = {"pod_size": 20, "iterations": 60, "b": 1.0}


def _prepare(world, tasks, uavs, planner):
    active = sorted(tasks.active_tasks(), key=lambda t: t.id)
    roster = sorted(uavs, key=lambda u: u.id)
    if not roster:
        raise ValueError("at least one UAV required")
    if not active:
        return roster, active, None
    if planner is None:
        planner = GridPathPlanner(world)
    return roster, active, build_cost_matrix(planner, roster, active)


def _seed_scores(n_uavs: int, n_tasks: int) -> np.ndarray:
    """Score matrix whose argmin decode is the round-robin seed assignment."""
    scores = np.ones((n_uavs, n_tasks))
    scores[np.arange(n_uavs), np.arange(n_uavs) % n_tasks] = 0.0
    return scores.ravel()


class _Incumbent:
    def __init__(self, cost_matrix: np.ndarray):
        self.cost_matrix = cost_matrix
        vec = repair_assignment(seed_assignment(*cost_matrix.shape), cost_matrix)
        self.vec = vec
        self.cost = assignment_cost(cost_matrix, vec)

    def offer(self, vec: np.ndarray) -> float:
        cost = assignment_cost(self.cost_matrix, vec)
        if better(cost, vec, self.cost, self.vec):
            self.cost, self.vec = cost, vec.copy()
        return cost


def assign_aco(world, tasks, uavs, params=None, seed: int = 0, planner=None) -> Assignment:
    """Ant colony optimization on the assignment objective.

    Ants build per-UAV task choices from pheromone**alpha * heuristic**beta;
    the iteration best and global best deposit pheromone after evaporation.
    """
    p = {**ACO_DEFAULTS, **(params or {})}
    roster, active, cost_matrix = _prepare(world, tasks, uavs, planner)
    if cost_matrix is None:
        return Assignment(pairs=(), unassigned=())
    rng = np.random.default_rng(seed)
    n_uavs, n_tasks = cost_matrix.shape

    scale = float(np.mean(cost_matrix)) or 1.0
    eta = 1.0 / (0.1 + cost_matrix / scale)
    tau = np.ones((n_uavs, n_tasks))
    inc = _Incumbent(cost_matrix)
    q = max(inc.cost, 1e-9)

    n_ants = int(p["n_ants"])
    for _ in range(int(p["iterations"])):
        weights = tau ** p["alpha"] * eta ** p["beta"]
        ants = np.empty((n_ants, n_uavs), dtype=int)
        for i in range(n_uavs):
            cum = np.cumsum(weights[i])
            draws = rng.random(n_ants) * cum[-1]
            ants[:, i] = np.minimum(np.searchsorted(cum, draws), n_tasks - 1)
        it_best_cost, it_best_vec = np.inf, None
        for a in range(n_ants):
            vec = repair_assignment(ants[a], cost_matrix)
            cost = inc.offer(vec)
            if cost < it_best_cost:
                it_best_cost, it_best_vec = cost, vec
        tau *= 1.0 - p["evaporation"]
        tau[np.arange(n_uavs), it_best_vec] += q / it_best_cost
        tau[np.arange(n_uavs), inc.vec] += q / inc.cost
    return vector_to_assignment(inc.vec, roster, active)


def assign_gwo(world, tasks, uavs, params=None, seed: int = 0, planner=None) -> Assignment:
    """Grey wolf optimizer: pack positions pulled toward the alpha, beta, and
    delta wolves with the exploration coefficient shrinking from 2 to 0."""
    p = {**GWO_DEFAULTS, **(params or {})}
    roster, active, cost_matrix = _prepare(world, tasks, uavs, planner)
    if cost_matrix is None:
        return Assignment(pairs=(), unassigned=())
    rng = np.random.default_rng(seed)
    n_uavs, n_tasks = cost_matrix.shape
    dim = n_uavs * n_tasks
    pack = int(p["pack_size"])
    iters = int(p["iterations"])

    X = rng.uniform(0.0, 1.0, size=(pack, dim))
    X[0] = _seed_scores(n_uavs, n_tasks)
    inc = _Incumbent(cost_matrix)

    def eval_all(X):
        costs = np.empty(len(X))
        for i, row in enumerate(X):
            costs[i] = inc.offer(decode_scores(row, cost_matrix))
        return costs

    costs = eval_all(X)
    for it in range(iters):
        order = np.argsort(costs, kind="stable")
        x_a, x_b, x_d = X[order[0]], X[order[1 % pack]], X[order[2 % pack]]
        a = 2.0 * (1.0 - it / iters)
        A = a * (2.0 * rng.random((3, pack, dim)) - 1.0)
        C = 2.0 * rng.random((3, pack, dim))
        X1 = x_a - A[0] * np.abs(C[0] * x_a - X)
        X2 = x_b - A[1] * np.abs(C[1] * x_b - X)
        X3 = x_d - A[2] * np.abs(C[2] * x_d - X)
        X = np.clip((X1 + X2 + X3) / 3.0, 0.0, 1.0)
        costs = eval_all(X)
    return vector_to_assignment(inc.vec, roster, active)


def assign_woa(world, tasks, uavs, params=None, seed: int = 0, planner=None) -> Assignment:
    """Whale optimization: shrinking encirclement of the best whale, logarithmic
    spiral exploitation, and random-whale search for exploration."""
    p = {**WOA_DEFAULTS, **(params or {})}
    roster, active, cost_matrix = _prepare(world, tasks, uavs, planner)
    if cost_matrix is None:
        return Assignment(pairs=(), unassigned=())
    rng = np.random.default_rng(seed)
    n_uavs, n_tasks = cost_matrix.shape
    dim = n_uavs * n_tasks
    pod = int(p["pod_size"])
    iters = int(p["iterations"])
    b = float(p["b"])

    X = rng.uniform(0.0, 1.0, size=(pod, dim))
    X[0] = _seed_scores(n_uavs, n_tasks)
    inc = _Incumbent(cost_matrix)

    best_vec_cont = X[0].copy()
    best_cost_cont = np.inf

    def eval_all(X):
        nonlocal best_vec_cont, best_cost_cont
        costs = np.empty(len(X))
        for i, row in enumerate(X):
            costs[i] = inc.offer(decode_scores(row, cost_matrix))
            if costs[i] < best_cost_cont:
                best_cost_cont = costs[i]
                best_vec_cont = row.copy()
        return costs

    eval_all(X)
    for it in range(iters):
        a = 2.0 * (1.0 - it / iters)
        r1 = rng.random((pod, dim))
        r2 = rng.random((pod, dim))
        A = 2.0 * a * r1 - a
        C = 2.0 * r2
        l = rng.uniform(-1.0, 1.0, (pod, dim))
        coin = rng.random((pod, 1))
        rand_idx = rng.integers(0, pod, size=pod)

        x_star = best_vec_cont
        d_star = np.abs(C * x_star - X)
        encircle = x_star - A * d_star
        x_rand = X[rand_idx]
        search = x_rand - A * np.abs(C * x_rand - X)
        attack = np.where(np.abs(A) < 1.0, encircle, search)
        spiral = np.abs(x_star - X) * np.exp(b * l) * np.cos(2.0 * np.pi * l) + x_star
        X = np.clip(np.where(coin < 0.5, attack, spiral), 0.0, 1.0)
        eval_all(X)
    return vector_to_assignment(inc.vec, roster, active)
