"""Shared assignment objective for the centralized strategies.

Every optimizer minimizes the same thing, so the comparison isolates the
algorithm: sum of type-match-penalized path distances plus a balance penalty
on how unevenly tasks are loaded with UAVs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Weight on the variance of per-task assignment counts.
LAMBDA_BALANCE = 5.0
# Additive distance penalty when UAV and task types differ. A mismatched UAV
# cannot service the task at all, so the penalty must dominate any real path
# length or a nearby wrong-type task would beat a distant right-type one.
MISMATCH_PENALTY = 1e5
# Stand-in distance for unreachable pairs.
UNREACHABLE_COST = 1e6


@dataclass(frozen=True)
class Assignment:
    """(uav id, task id) pairs plus the task ids left unassigned."""

    pairs: tuple[tuple[str, str], ...]
    unassigned: tuple[str, ...]

    def task_for(self, uav_id: str) -> str | None:
        for u, t in self.pairs:
            if u == uav_id:
                return t
        return None


def task_cap(n_uavs: int, n_tasks: int) -> int:
    """Most UAVs any single task may receive."""
    return math.ceil(n_uavs / max(n_tasks, 1)) + 1


def build_cost_matrix(planner, uavs, tasks) -> np.ndarray:
    """cost[i, j]: penalized path distance from UAV i to active task j."""
    mat = np.empty((len(uavs), len(tasks)))
    for i, u in enumerate(uavs):
        for j, t in enumerate(tasks):
            d = planner.distance((u.x, u.y), (t.x, t.y))
            if not math.isfinite(d):
                d = UNREACHABLE_COST
            if u.uav_type != t.task_type:
                d += MISMATCH_PENALTY
            mat[i, j] = d
    return mat


def assignment_cost(cost_matrix: np.ndarray, assign: np.ndarray) -> float:
    """Objective for one assignment vector (UAV index -> task index)."""
    n_uavs, n_tasks = cost_matrix.shape
    base = float(cost_matrix[np.arange(n_uavs), assign].sum())
    counts = np.bincount(assign, minlength=n_tasks)
    return base + LAMBDA_BALANCE * float(np.var(counts))


def repair_assignment(scores_or_assign: np.ndarray, cost_matrix: np.ndarray) -> np.ndarray:
    """Enforce the per-task cap by bumping over-cap UAVs (in id order) to
    their next-cheapest task with room."""
    n_uavs, n_tasks = cost_matrix.shape
    cap = task_cap(n_uavs, n_tasks)
    counts = np.zeros(n_tasks, dtype=int)
    out = np.empty(n_uavs, dtype=int)
    for i in range(n_uavs):
        j = int(scores_or_assign[i])
        if counts[j] >= cap:
            order = np.argsort(cost_matrix[i], kind="stable")
            for cand in order:
                if counts[cand] < cap:
                    j = int(cand)
                    break
        out[i] = j
        counts[j] += 1
    return out


def decode_scores(scores: np.ndarray, cost_matrix: np.ndarray) -> np.ndarray:
    """Continuous encoding -> assignment: per-UAV argmin over that UAV's task
    scores (first index wins ties), then cap repair."""
    n_uavs, n_tasks = cost_matrix.shape
    raw = np.argmin(scores.reshape(n_uavs, n_tasks), axis=1)
    return repair_assignment(raw, cost_matrix)


def vector_to_assignment(assign: np.ndarray, uavs, tasks) -> Assignment:
    pairs = tuple((uavs[i].id, tasks[int(j)].id) for i, j in enumerate(assign))
    used = {tasks[int(j)].id for j in assign}
    unassigned = tuple(t.id for t in tasks if t.id not in used)
    return Assignment(pairs=pairs, unassigned=unassigned)


def better(cost_a: float, vec_a: np.ndarray, cost_b: float, vec_b: np.ndarray) -> bool:
    """True when (cost_a, vec_a) beats (cost_b, vec_b); cost ties break toward
    the lexicographically smaller assignment vector (lower uav id takes the
    lower task id)."""
    if cost_a < cost_b - 1e-12:
        return True
    if cost_a > cost_b + 1e-12:
        return False
    return tuple(vec_a) < tuple(vec_b)


def seed_assignment(n_uavs: int, n_tasks: int) -> np.ndarray:
    """Deterministic round-robin starting incumbent."""
    return np.arange(n_uavs, dtype=int) % max(n_tasks, 1)
