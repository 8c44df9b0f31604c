"""Exact assignment solvers, dynamic fleet dispatch and distributed allocation protocols."""

from .distributed import (
    NetworkTopology,
    greedy_sequential,
    run_cbaa,
    run_distributed_auction,
    run_lossy,
)
from .dynamic import (
    Scenario,
    clairvoyant_optimum,
    per_period_variant_policy,
    run_scenario,
    step,
    validate_trajectory,
)
from .errors import (
    AssignmentError,
    ConstraintViolation,
    GuardExceeded,
    InfeasibleError,
    NonConvergence,
    ParseError,
)
from .instance import (
    AssignmentInstance,
    DualState,
    Matching,
    Objective,
    Sense,
    SideConstraintSet,
    objective_value,
    pad_to_square,
)
from .lap import (
    detect_naive_auction_cycle,
    epsilon_schedule,
    solve_auction,
    solve_auction_scaled,
    solve_hungarian,
)
from .oracle import brute_force
from .variants import (
    SemiAssignmentDemand,
    solve_apraq,
    solve_bottleneck,
    solve_fair_matching,
    solve_k_sum,
    solve_min_deviation,
    solve_semi_assignment,
    solve_with_side_constraints,
)

__all__ = [
    "AssignmentError",
    "AssignmentInstance",
    "ConstraintViolation",
    "DualState",
    "GuardExceeded",
    "InfeasibleError",
    "Matching",
    "NetworkTopology",
    "NonConvergence",
    "Objective",
    "ParseError",
    "Scenario",
    "SemiAssignmentDemand",
    "Sense",
    "SideConstraintSet",
    "brute_force",
    "clairvoyant_optimum",
    "detect_naive_auction_cycle",
    "epsilon_schedule",
    "greedy_sequential",
    "objective_value",
    "pad_to_square",
    "per_period_variant_policy",
    "run_cbaa",
    "run_distributed_auction",
    "run_lossy",
    "run_scenario",
    "solve_apraq",
    "solve_auction",
    "solve_auction_scaled",
    "solve_bottleneck",
    "solve_fair_matching",
    "solve_hungarian",
    "solve_k_sum",
    "solve_min_deviation",
    "solve_semi_assignment",
    "solve_with_side_constraints",
    "step",
    "validate_trajectory",
]
