"""Classical allocation strategies run behind the same harness as the
coordination field: ant colony, grey wolf, whale optimization, and A*."""

from .astar import plan_astar
from .cost import (
    Assignment,
    LAMBDA_BALANCE,
    MISMATCH_PENALTY,
    assignment_cost,
    build_cost_matrix,
    decode_scores,
    repair_assignment,
    task_cap,
)
from .harness import (
    STRATEGY_NAMES,
    AllocationStrategy,
    make_strategy,
    run_strategy_step,
)
from .optimizers import assign_aco, assign_gwo, assign_woa
from .planner import GridPathPlanner

__all__ = [
    "Assignment",
    "AllocationStrategy",
    "GridPathPlanner",
    "LAMBDA_BALANCE",
    "MISMATCH_PENALTY",
    "STRATEGY_NAMES",
    "assign_aco",
    "assign_gwo",
    "assign_woa",
    "assignment_cost",
    "build_cost_matrix",
    "decode_scores",
    "make_strategy",
    "plan_astar",
    "repair_assignment",
    "run_strategy_step",
    "task_cap",
]
