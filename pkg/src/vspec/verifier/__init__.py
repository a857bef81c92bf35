"""Built-in sound-and-complete verifier for ReLU-network linear queries."""

from .engine import (
    DEFAULT_PHASE_BUDGET,
    Skeleton,
    check_query,
    propagate_bounds,
    unroll_meta_network,
)
from .lp import LPConstraint, LPProblem, feasible
from .oracle import constraint_holds, evaluate_networks, grid_oracle, query_box

__all__ = [
    "DEFAULT_PHASE_BUDGET",
    "LPConstraint",
    "LPProblem",
    "Skeleton",
    "check_query",
    "constraint_holds",
    "evaluate_networks",
    "feasible",
    "grid_oracle",
    "propagate_bounds",
    "query_box",
    "unroll_meta_network",
]
