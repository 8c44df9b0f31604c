"""Centralized optimal LAP solvers: Hungarian primal-dual method and the
epsilon-auction (with epsilon scaling), plus the naive-auction cycle probe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import InfeasibleError, NonConvergence
from .instance import AssignmentInstance, DualState, Matching, to_fraction

_I64_LIMIT = 2**62
# recorded price vectors per auction phase
HISTORY_CAP = 10_000


def _require_square(instance: AssignmentInstance) -> None:
    if not instance.is_square:
        raise ValueError(
            f"solver needs a square instance, got {instance.n_agents}x{instance.n_tasks}; use pad_to_square first"
        )


def _check_rows_feasible(cost: AssignmentInstance) -> None:
    dead = np.flatnonzero(cost.forbidden.all(axis=1))
    if dead.size:
        raise InfeasibleError(f"infeasible: every pair of agent {int(dead[0])} is forbidden")
    dead = np.flatnonzero(cost.forbidden.all(axis=0))
    if dead.size:
        raise InfeasibleError(f"infeasible: every pair of task {int(dead[0])} is forbidden")


def _max_abs(c: np.ndarray, allowed: np.ndarray) -> int:
    return int(np.abs(c[allowed]).max()) if allowed.any() else 0


def _scaled(c: np.ndarray, factor: int, bound: int) -> np.ndarray:
    """``c * factor`` as int64 when ``bound`` leaves headroom, else as Python ints."""
    if bound < _I64_LIMIT:
        return np.array(c, dtype=np.int64) * factor
    return np.array(c, dtype=object) * factor


def _uses_forbidden(cost: AssignmentInstance, agent_task: np.ndarray) -> bool:
    return bool(cost.forbidden[np.arange(cost.n_agents), agent_task].any())


# -- Hungarian ---------------------------------------------------------------


def _hungarian_numer(cost: AssignmentInstance) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve the integer LAP on ``cost.numer``.

    Returns ``(agent_task, u, v)`` with integer duals on the numerator scale.
    Forbidden pairs get a cost larger than any matching that avoids them.
    """
    n = cost.n_agents
    allowed = cost.allowed
    m_abs = _max_abs(cost.numer, allowed)
    big = 2 * n * m_abs + 1
    bound = 8 * (n + 1) * (big + m_abs)
    c = _scaled(cost.numer, 1, bound)
    if not allowed.all():
        c = np.where(allowed, c, big).astype(c.dtype)
    # tree roots are tasks: work on the transpose
    a = np.ascontiguousarray(c.T)
    jit = c.dtype != object
    row_pot = np.zeros(n + 1, dtype=c.dtype)
    col_pot = np.zeros(n + 1, dtype=c.dtype)
    # starting duals: task potential = column minimum, agent potential = row
    # minimum of the reduced matrix
    row_pot[1:] = a.min(axis=1)
    col_pot[1:] = (a - row_pot[1:, None]).min(axis=0)
    p = np.zeros(n + 1, dtype=np.int64)
    if jit:
        _kernels.greedy_tight_kernel(a, row_pot, col_pot, p)
        _kernels.hungarian_kernel(a, row_pot, col_pot, p, np.int64(_I64_LIMIT))
    else:
        _kernels.greedy_tight_kernel.py_func(a, row_pot, col_pot, p)
        inf = 4 * bound * bound + 1
        _kernels.hungarian_kernel.py_func(a, row_pot, col_pot, p, inf)
    agent_task = np.empty(n, dtype=np.int64)
    for agent in range(1, n + 1):
        agent_task[agent - 1] = p[agent] - 1
    return agent_task, col_pot[1:], row_pot[1:]


def solve_hungarian(instance: AssignmentInstance) -> tuple[Matching, DualState]:
    """Optimal minimum-cost perfect matching with an exact dual certificate.

    Profit instances are solved on their cost form ``W - p``; the returned
    duals certify that cost form.
    """
    _require_square(instance)
    cost = instance.as_cost_instance()
    _check_rows_feasible(cost)
    agent_task, u, v = _hungarian_numer(cost)
    if _uses_forbidden(cost, agent_task):
        raise InfeasibleError("infeasible: no perfect matching avoids the forbidden pairs")
    s = cost.scale
    duals = DualState(tuple(Fraction(int(x), s) for x in u), tuple(Fraction(int(x), s) for x in v), 0)
    return Matching.from_assignment(agent_task), duals


def min_cost_assignment(instance: AssignmentInstance) -> np.ndarray | None:
    """Agent-to-task vector of a min-cost perfect matching, or None if infeasible.

    Unlike :func:`solve_hungarian` this never raises on infeasibility, which
    suits callers that probe many restricted subproblems.
    """
    cost = instance.as_cost_instance()
    if cost.forbidden.all(axis=1).any() or cost.forbidden.all(axis=0).any():
        return None
    agent_task, _, _ = _hungarian_numer(cost)
    if _uses_forbidden(cost, agent_task):
        return None
    return agent_task


# -- auction -----------------------------------------------------------------


@dataclass(frozen=True)
class AuctionTrace:
    rounds: int
    final_epsilon: Fraction
    price_history: tuple[tuple[Fraction, ...], ...] | None = None
    phase_rounds: tuple[int, ...] = field(default=())


def epsilon_schedule(n: int, max_abs_weight) -> list[Fraction]:
    """Geometric epsilon-scaling schedule.

    Starts at ``max(1, C/2)``, divides by 4 each phase and stops at the first
    value below ``1/n``. A single agent needs no scaling and gets ``[1/2]``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return [Fraction(1, 2)]
    eps = max(Fraction(1), to_fraction(max_abs_weight) / 2)
    limit = Fraction(1, n)
    out = [eps]
    while eps >= limit:
        eps /= 4
        out.append(eps)
    return out


def _run_auction(
    instance: AssignmentInstance,
    epsilons: list[Fraction],
    record_prices: bool,
    max_rounds: int | None,
) -> tuple[Matching, DualState, AuctionTrace]:
    _require_square(instance)
    if not epsilons or any(e <= 0 for e in epsilons):
        raise ValueError("epsilon must be positive")
    cost = instance.as_cost_instance()
    _check_rows_feasible(cost)
    n = cost.n_agents
    unit = cost.scale
    for e in epsilons:
        unit = math.lcm(unit, e.denominator)
    factor = unit // cost.scale
    eps_units = [int(e * unit) for e in epsilons]
    allowed = cost.allowed
    m_abs = _max_abs(cost.numer, allowed) * factor
    # any matching through a forbidden pair then costs more than the
    # epsilon-suboptimality band around a feasible optimum
    big = 2 * n * m_abs + n * max(eps_units) + 1
    bound = 16 * (n + 1) * (big + max(eps_units))
    c = _scaled(cost.numer, factor, bound)
    if not allowed.all():
        c = np.where(allowed, c, big).astype(c.dtype)
    jit = c.dtype != object
    kernel = _kernels.auction_kernel if jit else _kernels.auction_kernel.py_func
    prices = np.zeros(n, dtype=c.dtype)
    history_rows = []
    phase_rounds = []
    spread = 2 * big
    for eps in eps_units:
        guard = max_rounds if max_rounds is not None else 4 * n * (spread // eps + 2) + 16
        agent_task = np.full(n, -1, dtype=np.int64)
        task_agent = np.full(n, -1, dtype=np.int64)
        hist = np.zeros((min(guard, HISTORY_CAP) if record_prices else 0, n), dtype=c.dtype)
        step_eps = np.int64(eps) if jit else eps
        rounds = kernel(c, prices, step_eps, agent_task, task_agent, guard, hist)
        if rounds < 0:
            raise NonConvergence(
                f"auction exceeded {guard} rounds at epsilon {Fraction(eps, unit)}",
                {"rounds": -rounds, "epsilon": str(Fraction(eps, unit))},
            )
        phase_rounds.append(rounds)
        if record_prices:
            kept = min(rounds, hist.shape[0])
            history_rows.extend(tuple(Fraction(int(x), unit) for x in hist[r]) for r in range(kept))
    if _uses_forbidden(cost, agent_task):
        raise InfeasibleError("infeasible: no perfect matching avoids the forbidden pairs")
    # u_i = min_j (c_ij + p_j) over allowed pairs; v_j = -p_j
    full = c + prices[None, :]
    full = np.where(allowed, full, full.max() + 1).astype(full.dtype) if not allowed.all() else full
    u = full.min(axis=1)
    duals = DualState(
        tuple(Fraction(int(x), unit) for x in u),
        tuple(Fraction(-int(x), unit) for x in prices),
        Fraction(eps_units[-1], unit),
    )
    trace = AuctionTrace(
        rounds=sum(phase_rounds),
        final_epsilon=Fraction(eps_units[-1], unit),
        price_history=tuple(history_rows) if record_prices else None,
        phase_rounds=tuple(phase_rounds),
    )
    return Matching.from_assignment(agent_task), duals, trace


def solve_auction(
    instance: AssignmentInstance,
    epsilon,
    record_prices: bool = False,
    max_rounds: int | None = None,
) -> tuple[Matching, DualState, AuctionTrace]:
    """Epsilon-corrected auction with Jacobi rounds.

    The result satisfies epsilon-complementary slackness; its Sum is within
    ``n * epsilon`` of the optimum, and exactly optimal for integer weights
    when ``epsilon < 1/n``.
    """
    eps = to_fraction(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    return _run_auction(instance, [eps], record_prices, max_rounds)


def solve_auction_scaled(
    instance: AssignmentInstance,
    schedule: list | None = None,
    record_prices: bool = False,
) -> tuple[Matching, DualState, AuctionTrace]:
    """Auction over a decreasing epsilon schedule, warm-starting prices."""
    if schedule is None:
        schedule = epsilon_schedule(instance.n_agents, instance.as_cost_instance().max_abs_weight())
    return _run_auction(instance, [to_fraction(e) for e in schedule], record_prices, None)


# -- naive auction -----------------------------------------------------------


@dataclass(frozen=True)
class Converged:
    matching: Matching
    round: int


@dataclass(frozen=True)
class CycleDetected:
    round: int
    agent: int | None = None
    task: int | None = None


def detect_naive_auction_cycle(instance: AssignmentInstance, max_rounds: int) -> Converged | CycleDetected:
    """Run the auction with zero increment and report whether it cycles.

    A cycle is declared when an unassigned agent repeats a zero-gap bid for
    the same task at an unchanged price, or when ``max_rounds`` runs out.
    Current holders keep bidding their winning price; ties go to the lowest
    agent index.
    """
    _require_square(instance)
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    cost = instance.as_cost_instance()
    n = cost.n_agents
    c = cost.weights()
    allowed = cost.allowed
    prices = [Fraction(0)] * n
    agent_task = [-1] * n
    task_agent = [-1] * n
    seen: set[tuple[int, int, Fraction]] = set()
    for rnd in range(1, max_rounds + 1):
        bids: dict[int, tuple[Fraction, int]] = {}
        for i in range(n):
            if agent_task[i] >= 0:
                continue
            options = sorted((c[i][j] + prices[j], j) for j in range(n) if allowed[i, j])
            if not options:
                return CycleDetected(rnd, i, None)
            best, j = options[0]
            gamma = options[1][0] - best if len(options) > 1 else Fraction(0)
            if gamma == 0:
                key = (i, j, prices[j])
                if key in seen:
                    return CycleDetected(rnd, i, j)
                seen.add(key)
            offer = prices[j] + gamma
            if j not in bids or offer > bids[j][0]:
                bids[j] = (offer, i)
        for j, (offer, i) in bids.items():
            holder = task_agent[j]
            if holder >= 0 and (offer < prices[j] or (offer == prices[j] and holder < i)):
                continue
            prices[j] = offer
            if holder >= 0:
                agent_task[holder] = -1
            task_agent[j] = i
            agent_task[i] = j
        if all(t >= 0 for t in agent_task):
            return Converged(Matching.from_assignment(agent_task), rnd)
    return CycleDetected(max_rounds)
