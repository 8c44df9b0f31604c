"""Exact solvers for the assignment-problem variants.

All of them reduce to two primitives: perfect-matching feasibility on a
thresholded edge set (Hopcroft-Karp) and the min-cost LAP (Hungarian).

On a padded instance the dummy pairs are always admissible and never count
toward an objective, so e.g. the bottleneck of a padded instance is the
bottleneck over matchings that saturate the smaller real side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InfeasibleError
from .instance import (
    MIN_DEVIATION,
    SPREAD,
    AssignmentInstance,
    Matching,
    Sense,
    SideConstraintSet,
    ksum,
    objective_value,
    pad_to_square,
)
from .lap import _hungarian_numer, min_cost_assignment
from .matching import matching_on_mask


@dataclass(frozen=True)
class ThresholdResult:
    threshold: Fraction
    matching: Matching
    feasibility_probes: int


@dataclass(frozen=True)
class SemiAssignmentDemand:
    d: tuple[int, ...]

    def __post_init__(self):
        d = tuple(int(x) for x in self.d)
        if not d or any(x < 1 for x in d):
            raise ValueError("demands must be positive integers")
        object.__setattr__(self, "d", d)

    @property
    def total(self) -> int:
        return sum(self.d)


@dataclass(frozen=True)
class SemiAssignment:
    """Agent ``i`` serves category ``categories[i]``."""

    categories: tuple[int, ...]
    value: Fraction

    def pairs(self) -> list[tuple[int, int]]:
        return list(enumerate(self.categories))


def _cost_square(instance: AssignmentInstance, name: str) -> AssignmentInstance:
    if instance.sense is not Sense.MINIMIZE_COST:
        raise ValueError(f"{name} expects a MinimizeCost instance; use as_cost_instance()")
    if not instance.is_square:
        raise ValueError(f"{name} needs a square instance; use pad_to_square first")
    return instance


def _real_mask(instance: AssignmentInstance) -> np.ndarray:
    mask = np.zeros(instance.shape, dtype=bool)
    mask[: instance.n_real_agents, : instance.n_real_tasks] = True
    return mask


class _Thresholds:
    """Distinct real weights and band feasibility probes for one instance."""

    def __init__(self, instance: AssignmentInstance):
        self.instance = instance
        self.w = instance.effective_numer()
        self.real = _real_mask(instance)
        self.allowed = instance.allowed
        live = self.allowed & self.real
        self.values = sorted({int(x) for x in self.w[live]})
        self.probes = 0
        self.n = instance.n_agents

    def band_mask(self, lo: int | None, hi: int | None) -> np.ndarray:
        inside = np.ones(self.w.shape, dtype=bool)
        if lo is not None:
            inside &= self.w >= lo
        if hi is not None:
            inside &= self.w <= hi
        return self.allowed & (~self.real | inside)

    def perfect(self, lo: int | None, hi: int | None) -> Matching | None:
        self.probes += 1
        m = matching_on_mask(self.band_mask(lo, hi))
        return m if len(m) == self.n else None


def solve_bottleneck(instance: AssignmentInstance) -> ThresholdResult:
    """Minimize the largest matched weight by binary search over thresholds."""
    _cost_square(instance, "solve_bottleneck")
    th = _Thresholds(instance)
    vals = th.values
    if not vals or th.perfect(None, vals[-1]) is None:
        raise InfeasibleError("infeasible: no perfect matching on the allowed pairs")
    lo, hi = 0, len(vals) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if th.perfect(None, vals[mid]) is not None:
            hi = mid
        else:
            lo = mid + 1
    matching = th.perfect(None, vals[lo])
    return ThresholdResult(Fraction(vals[lo], instance.scale), matching, th.probes)


def solve_fair_matching(instance: AssignmentInstance) -> tuple[Matching, Fraction]:
    """Minimize max - min of the matched weights.

    For each lower threshold (ascending) finds the smallest upper threshold
    whose band admits a perfect matching. Shrinking the band from below can
    only remove edges, so the upper pointer never moves back.
    """
    _cost_square(instance, "solve_fair_matching")
    th = _Thresholds(instance)
    vals = th.values
    best: tuple[int, Matching] | None = None
    b = 0
    for a in range(len(vals)):
        b = max(a, b)
        found = None
        while b < len(vals):
            found = th.perfect(vals[a], vals[b])
            if found is not None:
                break
            b += 1
        if found is None:
            break
        width = vals[b] - vals[a]
        if best is None or width < best[0]:
            best = (width, found)
            if width == 0:
                break
    if best is None:
        raise InfeasibleError("infeasible: no perfect matching on the allowed pairs")
    return best[1], objective_value(instance, best[1], SPREAD)


def _restricted_max_sum(instance: AssignmentInstance, keep: np.ndarray) -> np.ndarray | None:
    """Max-sum perfect matching of real weights using only ``keep`` real pairs."""
    real = _real_mask(instance)
    w = instance.effective_numer()
    cost = np.where(real, -w.astype(object) if w.dtype == object else -w, 0)
    forbidden = instance.forbidden | (real & ~keep)
    sub = AssignmentInstance(cost, instance.scale, Sense.MINIMIZE_COST, None, forbidden)
    return min_cost_assignment(sub)


def solve_min_deviation(instance: AssignmentInstance) -> tuple[Matching, Fraction]:
    """Minimize ``min(n, m) * max - sum`` of the matched weights.

    Sweeps the candidate maximum ``M`` over distinct weights that admit a
    perfect matching below it; for each, the best matching maximizes the sum
    among pairs ``<= M``. On a padded instance ``n, m`` are the real sizes
    and dummy pairs count toward neither the maximum nor the sum.
    """
    _cost_square(instance, "solve_min_deviation")
    th = _Thresholds(instance)
    vals = th.values
    if not vals or th.perfect(None, vals[-1]) is None:
        raise InfeasibleError("infeasible: no perfect matching on the allowed pairs")
    factor = min(instance.n_real_agents, instance.n_real_tasks)
    w = instance.effective_numer()
    best: tuple[int, np.ndarray] | None = None
    for top in vals:
        agent_task = _restricted_max_sum(instance, w <= top)
        if agent_task is None:
            continue
        total = sum(
            int(w[i, j]) for i, j in enumerate(agent_task) if not instance.is_dummy_pair(i, int(j))
        )
        score = factor * top - total
        if best is None or score < best[0]:
            best = (score, agent_task)
    matching = Matching.from_assignment(best[1])
    return matching, objective_value(instance, matching, MIN_DEVIATION)


def solve_k_sum(instance: AssignmentInstance, k: int) -> tuple[Matching, Fraction]:
    """Minimize the sum of the ``k`` largest matched weights.

    Uses ``sum of k largest = min_t (k*t + sum max(w - t, 0))``: for each
    distinct weight ``t`` solve the LAP on clipped costs and keep the best.
    """
    _cost_square(instance, "solve_k_sum")
    limit = min(instance.n_real_agents, instance.n_real_tasks)
    if not 1 <= k <= limit:
        raise ValueError(f"k must lie in [1, {limit}], got {k}")
    th = _Thresholds(instance)
    vals = th.values
    if not vals:
        raise InfeasibleError("infeasible: no allowed real pair")
    real = th.real
    best: tuple[int, np.ndarray] | None = None
    for t in vals:
        clipped = np.where(real, np.maximum(th.w - t, 0), 0).astype(th.w.dtype)
        sub = AssignmentInstance(clipped, instance.scale, Sense.MINIMIZE_COST, None, instance.forbidden)
        agent_task = min_cost_assignment(sub)
        if agent_task is None:
            raise InfeasibleError("infeasible: no perfect matching on the allowed pairs")
        score = k * t + sum(int(sub.numer[i, j]) for i, j in enumerate(agent_task))
        if best is None or score < best[0]:
            best = (score, agent_task)
    matching = Matching.from_assignment(best[1])
    return matching, objective_value(instance, matching, ksum(k))


def solve_semi_assignment(instance: AssignmentInstance, demand: SemiAssignmentDemand | Sequence[int]) -> SemiAssignment:
    """Each agent joins one category; category ``j`` takes exactly ``d[j]`` agents.

    Category ``j`` is replicated into ``d[j]`` identical task columns, giving
    an ``n x n`` LAP.
    """
    if not isinstance(demand, SemiAssignmentDemand):
        demand = SemiAssignmentDemand(tuple(demand))
    n, m = instance.shape
    if len(demand.d) != m:
        raise ValueError(f"demand has {len(demand.d)} entries for {m} categories")
    if m > n:
        raise ValueError("semi-assignment needs m <= n")
    if demand.total != n:
        raise ValueError(f"demands sum to {demand.total}, need {n}")
    cols = [j for j, dj in enumerate(demand.d) for _ in range(dj)]
    q = None if instance.qualification is None else instance.qualification[:, cols]
    wide = AssignmentInstance(instance.numer[:, cols], instance.scale, instance.sense, q, instance.forbidden[:, cols])
    agent_col = min_cost_assignment(wide)
    if agent_col is None:
        raise InfeasibleError("infeasible: demands cannot be met on the allowed pairs")
    categories = tuple(cols[int(c)] for c in agent_col)
    value = sum((instance.weight(i, j) for i, j in enumerate(categories)), Fraction(0))
    return SemiAssignment(categories, value)


def solve_apraq(instance: AssignmentInstance) -> Matching:
    """Max-utility partial matching over qualified pairs.

    Unqualified or non-positive pairs are given zero profit in a square
    padded LAP; only qualified pairs with positive profit are returned.
    """
    if instance.sense is not Sense.MAXIMIZE_PROFIT:
        raise ValueError("solve_apraq expects a MaximizeProfit instance")
    qual = instance.qualification if instance.qualification is not None else np.ones(instance.shape, bool)
    usable = qual & instance.allowed
    p = instance.numer
    gain = np.where(usable & (p > 0), p, 0)
    square = pad_to_square(AssignmentInstance(gain, instance.scale, Sense.MAXIMIZE_PROFIT))
    neg = -square.numer.astype(object) if square.numer.dtype == object else -square.numer
    agent_task = min_cost_assignment(AssignmentInstance(neg, square.scale, Sense.MINIMIZE_COST))
    n, m = instance.shape
    pairs = [
        (i, int(j))
        for i, j in enumerate(agent_task)
        if i < n and j < m and usable[i, j] and p[i, j] > 0
    ]
    return Matching.from_pairs(pairs, n, m)


# -- side constraints ----------------------------------------------------------


def _scaled_usage(constraints: SideConstraintSet, n: int) -> tuple[list[np.ndarray], list[int]]:
    """Integer usage matrices (padded to ``n x n``) and budgets per resource."""
    mats, budgets = [], []
    for mat, b in zip(constraints.usage, constraints.budgets):
        denom = b.denominator
        for row in mat:
            for x in row:
                denom = math.lcm(denom, x.denominator)
        arr = np.zeros((n, n), dtype=object)
        for i, row in enumerate(mat):
            for j, x in enumerate(row):
                arr[i, j] = int(x * denom)
        mats.append(arr)
        budgets.append(int(b * denom))
    return mats, budgets


def lap_bound(instance: AssignmentInstance, fixed: Sequence[tuple[int, int]]) -> Fraction | None:
    """Cost of ``fixed`` plus the unconstrained LAP optimum on the rest.

    This is the relaxation bound used at each branch-and-bound node; None
    when the residual instance has no perfect matching.
    """
    cost = instance.as_cost_instance()
    used_a = {i for i, _ in fixed}
    used_t = {j for _, j in fixed}
    fixed_cost = sum((cost.weight(i, j) for i, j in fixed), Fraction(0))
    agents = [i for i in range(cost.n_agents) if i not in used_a]
    tasks = [j for j in range(cost.n_tasks) if j not in used_t]
    if not agents:
        return fixed_cost
    sub = cost.submatrix(agents, tasks)
    agent_task = min_cost_assignment(sub)
    if agent_task is None:
        return None
    return fixed_cost + sum((sub.weight(i, int(j)) for i, j in enumerate(agent_task)), Fraction(0))


def solve_with_side_constraints(instance: AssignmentInstance, constraints: SideConstraintSet) -> Matching:
    """Optimal perfect matching under knapsack budgets, by depth-first branch and bound.

    Branches on agents in index order, trying tasks by ascending reduced cost
    of the root LAP duals. Each node is bounded by the LAP optimum of its
    residual instance; when that completion already meets every budget it is
    optimal for the node and no further branching happens there.
    """
    if not instance.is_square:
        raise ValueError("solve_with_side_constraints needs a square instance; use pad_to_square first")
    constraints.check_shape(instance)
    cost = instance.as_cost_instance()
    n = cost.n_agents
    c = cost.numer.astype(object)
    allowed = cost.allowed
    usage, budgets = _scaled_usage(constraints, n)
    if cost.forbidden.all(axis=1).any():
        raise InfeasibleError("infeasible: an agent has no allowed task")
    root_task, u, v = _hungarian_numer(cost)
    if cost.forbidden[np.arange(n), root_task].any():
        raise InfeasibleError("infeasible: no perfect matching avoids the forbidden pairs")
    reduced = c - np.array(u, dtype=object)[:, None] - np.array(v, dtype=object)[None, :]
    order = [sorted((j for j in range(n) if allowed[i, j]), key=lambda j, i=i: (reduced[i, j], j)) for i in range(n)]

    best_cost: list = [None]
    best_pairs: list = [None]

    def completion(agent: int, used: list[bool]):
        agents = list(range(agent, n))
        tasks = [j for j in range(n) if not used[j]]
        sub = AssignmentInstance(
            c[np.ix_(agents, tasks)], 1, Sense.MINIMIZE_COST, None, cost.forbidden[np.ix_(agents, tasks)]
        )
        at = min_cost_assignment(sub)
        if at is None:
            return None
        pairs = [(agents[r], tasks[int(t)]) for r, t in enumerate(at)]
        return sum(c[i, j] for i, j in pairs), pairs

    def usage_floor(agent: int, used: list[bool], k: int) -> int | None:
        total = 0
        for i in range(agent, n):
            cheapest = min((usage[k][i, j] for j in range(n) if not used[j] and allowed[i, j]), default=None)
            if cheapest is None:
                return None
            total += cheapest
        return total

    def visit(agent: int, fixed: list[tuple[int, int]], fixed_cost, spent: list[int], used: list[bool]):
        if agent == n:
            if best_cost[0] is None or fixed_cost < best_cost[0]:
                best_cost[0], best_pairs[0] = fixed_cost, list(fixed)
            return
        for k, b in enumerate(budgets):
            floor = usage_floor(agent, used, k)
            if floor is None or spent[k] + floor > b:
                return
        done = completion(agent, used)
        if done is None:
            return
        rest_cost, rest_pairs = done
        bound = fixed_cost + rest_cost
        if best_cost[0] is not None and bound >= best_cost[0]:
            return
        if all(spent[k] + sum(usage[k][i, j] for i, j in rest_pairs) <= b for k, b in enumerate(budgets)):
            best_cost[0], best_pairs[0] = bound, fixed + rest_pairs
            return
        for j in order[agent]:
            if used[j]:
                continue
            used[j] = True
            visit(
                agent + 1,
                fixed + [(agent, j)],
                fixed_cost + c[agent, j],
                [s + usage[k][agent, j] for k, s in enumerate(spent)],
                used,
            )
            used[j] = False

    visit(0, [], 0, [0] * len(budgets), [False] * n)
    if best_pairs[0] is None:
        raise InfeasibleError("infeasible: no perfect matching satisfies the budgets")
    return Matching.from_pairs(best_pairs[0], n, n)
