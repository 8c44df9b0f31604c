"""Rolling-horizon execution of the dynamic assignment model.

Agents and tasks enter once (``arrival`` periods, 1-based), and each period
a policy matches the currently available ones. Availability evolves by

    alpha[i, t+1] = alpha[i, t] - sum_j x[i, j, t] + A_hat[i, t+1]
    beta[j, t+1]  = beta[j, t]  - sum_i x[i, j, t] / d_j + T_hat[j, t+1]

with ``d_j = 1`` unless the scenario carries semi-assignment demands.

Two modes:

* ``commit``: a decision is final and both parties leave at the end of the
  period.
* ``reassign``: a decision is a commitment that only becomes final once the
  agent's ETA for that task has elapsed. Until then the agent and task stay
  in the per-period matrix and the policy may move them.

With ``service_durations`` the scenario is renewable: an agent that finishes
a task after ``d`` periods re-enters as a fresh synthetic agent with the
same utility rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .errors import ConstraintViolation, GuardExceeded, InfeasibleError
from .instance import (
    AssignmentInstance,
    Matching,
    Objective,
    Sense,
    SideConstraintSet,
    objective_value,
    pad_to_square,
    scale_rationals,
)
from .lap import min_cost_assignment
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

CLAIRVOYANT_SLOTS = 10


class Mode(str, Enum):
    COMMIT = "commit"
    REASSIGN = "reassign"


def _opt_int_matrix(values, shape: tuple[int, int], name: str) -> np.ndarray | None:
    if values is None:
        return None
    arr = np.asarray(values, dtype=np.int64)
    if arr.shape != shape:
        raise ValueError(f"{name} shape {arr.shape} != {shape}")
    if (arr < 1).any():
        raise ValueError(f"{name} entries must be >= 1 period")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Scenario:
    """Arrivals and per-period utilities of a dynamic instance.

    ``numer[t - 1, i, j] / scale`` is the utility (or cost) of pairing agent
    ``i`` with task ``j`` in period ``t``. An arrival of ``None`` means the
    agent or task never enters.
    """

    horizon: int
    agent_arrivals: tuple[int | None, ...]
    task_arrivals: tuple[int | None, ...]
    numer: np.ndarray
    scale: int = 1
    sense: Sense = Sense.MAXIMIZE_PROFIT
    mode: Mode = Mode.COMMIT
    service_durations: np.ndarray | None = None
    eta: np.ndarray | None = None
    qualification: np.ndarray | None = None
    demand: tuple[int, ...] | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        object.__setattr__(self, "sense", Sense.parse(self.sense))
        object.__setattr__(self, "mode", Mode(self.mode))
        for name in ("agent_arrivals", "task_arrivals"):
            arr = tuple(None if a is None else int(a) for a in getattr(self, name))
            bad = [a for a in arr if a is not None and not 1 <= a <= self.horizon]
            if bad:
                raise ValueError(f"{name} outside 1..{self.horizon}: {bad}")
            object.__setattr__(self, name, arr)
        n, m = len(self.agent_arrivals), len(self.task_arrivals)
        if n < 1 or m < 1:
            raise ValueError("a scenario needs at least one agent and one task")
        numer = np.asarray(self.numer)
        if numer.dtype != object:
            numer = numer.astype(np.int64)
        if numer.shape != (self.horizon, n, m):
            raise ValueError(f"utilities shape {numer.shape} != {(self.horizon, n, m)}")
        numer.setflags(write=False)
        object.__setattr__(self, "numer", numer)
        object.__setattr__(self, "service_durations", _opt_int_matrix(self.service_durations, (n, m), "service_durations"))
        object.__setattr__(self, "eta", _opt_int_matrix(self.eta, (n, m), "eta"))
        if self.qualification is not None:
            if self.sense is not Sense.MAXIMIZE_PROFIT:
                raise ValueError("qualification is only defined for profit scenarios")
            q = np.asarray(self.qualification, dtype=bool)
            if q.shape != (n, m):
                raise ValueError(f"qualification shape {q.shape} != {(n, m)}")
            q.setflags(write=False)
            object.__setattr__(self, "qualification", q)
        if self.demand is not None:
            d = SemiAssignmentDemand(tuple(self.demand)).d
            if len(d) != m:
                raise ValueError(f"demand has {len(d)} entries for {m} tasks")
            if self.mode is Mode.REASSIGN and any(x > 1 for x in d):
                raise ValueError("reassign mode supports unit demands only")
            object.__setattr__(self, "demand", d)

    @classmethod
    def build(cls, horizon: int, agent_arrivals, task_arrivals, utilities, **kwargs) -> Scenario:
        """Scenario from nested per-period utility rows (ints, Fractions or decimal strings)."""
        n, m = len(agent_arrivals), len(task_arrivals)
        flat = np.asarray(utilities, dtype=object).reshape(-1).tolist()
        numer, scale = scale_rationals(flat, (horizon, n, m))
        return cls(horizon, tuple(agent_arrivals), tuple(task_arrivals), numer, scale, **kwargs)

    @property
    def n_agents(self) -> int:
        return len(self.agent_arrivals)

    @property
    def n_tasks(self) -> int:
        return len(self.task_arrivals)

    @property
    def renewable(self) -> bool:
        return self.service_durations is not None

    def task_demand(self, j: int) -> int:
        return 1 if self.demand is None else self.demand[j]

    def utility_numer(self, period: int, agent: int, task: int) -> int:
        """Numerator of the realized utility; unqualified pairs earn nothing."""
        if self.qualification is not None and not self.qualification[agent, task]:
            return 0
        return int(self.numer[period - 1, agent, task])

    def utility(self, period: int, agent: int, task: int) -> Fraction:
        return Fraction(self.utility_numer(period, agent, task), self.scale)

    def period_instance(self, period: int, agents: Sequence[int], tasks: Sequence[int]) -> AssignmentInstance:
        """Static instance of ``period`` restricted to original ``agents`` x ``tasks``."""
        ai = np.asarray(agents, dtype=np.intp)
        ti = np.asarray(tasks, dtype=np.intp)
        q = None if self.qualification is None else self.qualification[np.ix_(ai, ti)]
        return AssignmentInstance(self.numer[period - 1][np.ix_(ai, ti)], self.scale, self.sense, q)

    def replace(self, **changes) -> Scenario:
        fields = {
            "horizon": self.horizon,
            "agent_arrivals": self.agent_arrivals,
            "task_arrivals": self.task_arrivals,
            "numer": self.numer,
            "scale": self.scale,
            "sense": self.sense,
            "mode": self.mode,
            "service_durations": self.service_durations,
            "eta": self.eta,
            "qualification": self.qualification,
            "demand": self.demand,
            "seed": self.seed,
        }
        fields.update(changes)
        return Scenario(**fields)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is b
            return np.array_equal(a, b)

        return (
            self.horizon == other.horizon
            and self.agent_arrivals == other.agent_arrivals
            and self.task_arrivals == other.task_arrivals
            and self.sense == other.sense
            and self.mode == other.mode
            and self.demand == other.demand
            and self.seed == other.seed
            and bool(np.all(self.numer.astype(object) * other.scale == other.numer.astype(object) * self.scale))
            and same(self.service_durations, other.service_durations)
            and same(self.eta, other.eta)
            and same(self.qualification, other.qualification)
        )

    __hash__ = None  # type: ignore[assignment]


def generate_scenario(
    n_agents: int,
    n_tasks: int,
    horizon: int,
    *,
    low: int = 0,
    high: int = 9,
    seed: int = 0,
    sense: Sense | str = Sense.MAXIMIZE_PROFIT,
    mode: Mode | str = Mode.COMMIT,
) -> Scenario:
    """Uniform arrival periods in ``1..horizon`` and uniform integer utilities in ``[low, high]``."""
    if not (1 <= n_agents <= 10_000 and 1 <= n_tasks <= 10_000 and 1 <= horizon <= 10_000):
        raise ValueError("n_agents, n_tasks and horizon must lie in [1, 10000]")
    if low > high:
        raise ValueError("low must not exceed high")
    rng = np.random.default_rng(seed)
    agents = rng.integers(1, horizon + 1, size=n_agents).tolist()
    tasks = rng.integers(1, horizon + 1, size=n_tasks).tolist()
    numer = rng.integers(low, high + 1, size=(horizon, n_agents, n_tasks), dtype=np.int64)
    return Scenario(horizon, tuple(agents), tuple(tasks), numer, 1, Sense.parse(sense), Mode(mode), seed=seed)


# -- state ---------------------------------------------------------------------

ABSENT, IDLE, ASSIGNED, ASSISTING, DONE = "absent", "idle", "assigned", "assisting", "done"


@dataclass(frozen=True)
class Lifecycle:
    state: str = ABSENT
    task: int | None = None
    remaining: int = 0


@dataclass(frozen=True)
class FleetState:
    """Availability at the start of ``period`` (1-based; ``horizon + 1`` once finished).

    Agent indices beyond the scenario's agents are synthetic re-entries;
    ``origin`` maps every agent to the scenario agent whose utilities it uses.
    """

    period: int
    alpha: tuple[int, ...]
    beta: tuple[int, ...]
    lifecycle: tuple[Lifecycle, ...]
    origin: tuple[int, ...]
    arrivals: tuple[int | None, ...]


def initial_state(scenario: Scenario) -> FleetState:
    alpha = tuple(int(a == 1) for a in scenario.agent_arrivals)
    beta = tuple(int(a == 1) for a in scenario.task_arrivals)
    life = tuple(Lifecycle(IDLE) if a else Lifecycle() for a in alpha)
    return FleetState(1, alpha, beta, life, tuple(range(scenario.n_agents)), scenario.agent_arrivals)


@dataclass(frozen=True)
class PeriodView:
    """Everything a policy may look at in one period.

    ``instance`` rows follow ``agents`` and columns follow ``tasks``; it is
    None when either side is empty. Only current-period data is exposed.
    """

    period: int
    agents: tuple[int, ...]
    tasks: tuple[int, ...]
    instance: AssignmentInstance | None
    origin: tuple[int, ...]
    commitments: dict[int, int] = field(default_factory=dict)
    demand: tuple[int, ...] | None = None


@dataclass(frozen=True)
class PeriodDecision:
    period: int
    pairs: tuple[tuple[int, int], ...]
    pending: tuple[tuple[int, int], ...]
    value: Fraction
    stranded: int
    new_agents: tuple[tuple[int, int, int], ...] = ()


class PerPeriodPolicy(Protocol):
    name: str

    def __call__(self, view: PeriodView) -> Iterable[tuple[int, int]]: ...


def _check_proposal(view: PeriodView, scenario: Scenario, proposal: list[tuple[int, int]]) -> None:
    agents, tasks = set(view.agents), set(view.tasks)
    seen: set[int] = set()
    load: dict[int, int] = {}
    for i, j in proposal:
        if i not in agents:
            raise ConstraintViolation(f"constraint violation: agent {i} is not available in period {view.period}")
        if j not in tasks:
            raise ConstraintViolation(f"constraint violation: task {j} is not available in period {view.period}")
        if i in seen:
            raise ConstraintViolation(f"constraint violation: agent {i} assigned twice in period {view.period}")
        seen.add(i)
        load[j] = load.get(j, 0) + 1
    for j, count in load.items():
        if count != scenario.task_demand(j):
            raise ConstraintViolation(
                f"constraint violation: task {j} got {count} agents, needs 0 or {scenario.task_demand(j)}"
            )


def make_view(state: FleetState, scenario: Scenario) -> PeriodView:
    t = state.period
    agents = tuple(i for i, a in enumerate(state.alpha) if a)
    tasks = tuple(j for j, b in enumerate(state.beta) if b)
    inst = None
    if agents and tasks:
        inst = scenario.period_instance(t, [state.origin[i] for i in agents], tasks)
    commitments = {
        i: life.task for i, life in enumerate(state.lifecycle) if life.state == ASSIGNED and state.alpha[i]
    }
    demand = None if scenario.demand is None else tuple(scenario.demand[j] for j in tasks)
    return PeriodView(t, agents, tasks, inst, state.origin, commitments, demand)


def step(state: FleetState, scenario: Scenario, policy: PerPeriodPolicy) -> tuple[PeriodDecision, FleetState]:
    """Run ``policy`` for one period and apply the availability dynamics."""
    t, horizon = state.period, scenario.horizon
    if t > horizon:
        raise ValueError(f"scenario already finished after period {horizon}")
    view = make_view(state, scenario)
    proposal: list[tuple[int, int]] = []
    if view.instance is not None:
        raw = [(int(i), int(j)) for i, j in policy(view)]
        proposal = sorted(set(raw))
        if len(proposal) != len(raw):
            raise ConstraintViolation(f"constraint violation: duplicate pair in period {t}")
    _check_proposal(view, scenario, proposal)

    life = list(state.lifecycle)
    final: list[tuple[int, int]] = []
    pending: list[tuple[int, int]] = []
    if scenario.mode is Mode.COMMIT:
        final = proposal
    else:
        for i, j in proposal:
            cur = life[i]
            if cur.state == ASSIGNED and cur.task == j:
                remaining = cur.remaining
            else:
                remaining = 1 if scenario.eta is None else int(scenario.eta[state.origin[i], j])
            if remaining <= 1 or t == horizon:
                final.append((i, j))
            else:
                pending.append((i, j))
                life[i] = Lifecycle(ASSIGNED, j, remaining - 1)
        proposed = {i for i, _ in proposal}
        for i, cur in enumerate(life):
            if cur.state == ASSIGNED and i not in proposed:
                life[i] = Lifecycle(IDLE)

    value = sum((scenario.utility(t, state.origin[i], j) for i, j in final), Fraction(0))
    x_agent = [0] * len(state.alpha)
    x_task = [0] * len(state.beta)
    for i, j in final:
        x_agent[i] += 1
        x_task[j] += 1

    origin = list(state.origin)
    arrivals = list(state.arrivals)
    new_agents = []
    for i, j in final:
        if scenario.renewable:
            d = int(scenario.service_durations[origin[i], j])
            life[i] = Lifecycle(ASSISTING, j, d)
            if t + d <= horizon:
                new_agents.append((len(origin), origin[i], t + d))
                origin.append(origin[i])
                arrivals.append(t + d)
                life.append(Lifecycle())
                x_agent.append(0)
        else:
            life[i] = Lifecycle(DONE, j)
    for i, cur in enumerate(life):
        if cur.state == ASSISTING and (i, cur.task) not in final:
            life[i] = Lifecycle(ASSISTING, cur.task, cur.remaining - 1) if cur.remaining > 1 else Lifecycle(DONE, cur.task)

    nxt = t + 1
    old_alpha = list(state.alpha) + [0] * (len(origin) - len(state.alpha))
    alpha = tuple(old_alpha[i] - x_agent[i] + int(arrivals[i] == nxt) for i in range(len(origin)))
    beta = tuple(
        state.beta[j] - x_task[j] // scenario.task_demand(j) + int(scenario.task_arrivals[j] == nxt)
        for j in range(len(state.beta))
    )
    for i in range(len(origin)):
        if arrivals[i] == nxt and life[i].state == ABSENT:
            life[i] = Lifecycle(IDLE)

    covered = {j for _, j in final} | {j for _, j in pending}
    stranded = sum(1 for j in view.tasks if j not in covered)
    decision = PeriodDecision(t, tuple(final), tuple(pending), value, stranded, tuple(new_agents))
    return decision, FleetState(nxt, alpha, beta, tuple(life), tuple(origin), tuple(arrivals))


# -- trajectory ----------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Recorded run. ``alpha[i][t - 1]`` is agent ``i``'s availability in period ``t``."""

    decisions: tuple[tuple[tuple[int, int], ...], ...]
    per_period_values: tuple[Fraction, ...]
    total: Fraction
    alpha: tuple[tuple[int, ...], ...]
    beta: tuple[tuple[int, ...], ...]
    agent_arrivals: tuple[int | None, ...]
    agent_origin: tuple[int, ...]
    pending: tuple[tuple[tuple[int, int], ...], ...]
    stranded: tuple[int, ...]
    policy: str = ""
    per_period_objective: tuple[Fraction | None, ...] = ()

    @property
    def horizon(self) -> int:
        return len(self.decisions)

    @property
    def objective_total(self) -> Fraction | None:
        vals = [v for v in self.per_period_objective if v is not None]
        return sum(vals, Fraction(0)) if vals else None

    def assigned_tasks(self) -> set[int]:
        return {j for period in self.decisions for _, j in period}

    def unserved_tasks(self, scenario: Scenario) -> list[int]:
        done = self.assigned_tasks()
        return [j for j, a in enumerate(scenario.task_arrivals) if a is not None and j not in done]

    def coverage_satisfied(self, scenario: Scenario) -> bool:
        """Whether every task that arrived was assigned (the cost model's coverage constraint)."""
        return not self.unserved_tasks(scenario)

    def x(self) -> np.ndarray:
        """Dense decision tensor ``x[t - 1, i, j]``."""
        out = np.zeros((self.horizon, len(self.alpha), len(self.beta)), dtype=np.int64)
        for t, period in enumerate(self.decisions):
            for i, j in period:
                out[t, i, j] += 1
        return out

    def period_rows(self) -> list[dict]:
        return [
            {
                "period": t + 1,
                "assignments": len(self.decisions[t]),
                "period_value": str(self.per_period_values[t]),
                "stranded_tasks": self.stranded[t],
            }
            for t in range(self.horizon)
        ]


def run_scenario(scenario: Scenario, policy: PerPeriodPolicy) -> Trajectory:
    state = initial_state(scenario)
    alphas, betas = [], []
    decisions, values, pending, stranded, objective = [], [], [], [], []
    evaluate = getattr(policy, "evaluate", None)
    while state.period <= scenario.horizon:
        alphas.append(state.alpha)
        betas.append(state.beta)
        view = make_view(state, scenario)
        decision, state = step(state, scenario, policy)
        decisions.append(decision.pairs)
        values.append(decision.value)
        pending.append(decision.pending)
        stranded.append(decision.stranded)
        if evaluate is not None:
            objective.append(evaluate(view, decision.pairs) if decision.pairs else None)
    n_total = len(state.origin)
    alpha = tuple(
        tuple(col[i] if i < len(col) else 0 for col in alphas) for i in range(n_total)
    )
    beta = tuple(tuple(col[j] for col in betas) for j in range(scenario.n_tasks))
    return Trajectory(
        tuple(decisions),
        tuple(values),
        sum(values, Fraction(0)),
        alpha,
        beta,
        state.arrivals,
        state.origin,
        tuple(pending),
        tuple(stranded),
        getattr(policy, "name", type(policy).__name__),
        tuple(objective),
    )


def expand_renewals(scenario: Scenario, trajectory: Trajectory) -> Scenario:
    """Nonrenewable scenario in which every re-entry of ``trajectory`` is a fresh agent.

    Synthetic agent ``k`` becomes a real agent with the utilities of its
    origin and the recorded arrival period.
    """
    origin = list(trajectory.agent_origin)
    numer = scenario.numer[:, origin, :]
    q = None if scenario.qualification is None else scenario.qualification[origin, :]
    eta = None if scenario.eta is None else scenario.eta[origin, :]
    return scenario.replace(
        agent_arrivals=trajectory.agent_arrivals,
        numer=numer,
        service_durations=None,
        eta=eta,
        qualification=q,
    )


# -- validation ----------------------------------------------------------------


@dataclass(frozen=True)
class FamilyResult:
    passed: bool
    first_violation: tuple | None = None
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    families: dict[str, FamilyResult]

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.families.values())

    def failed(self) -> list[str]:
        return [name for name, f in self.families.items() if not f.passed]


def _first(violations: Iterable[tuple], detail: str) -> FamilyResult:
    for v in violations:
        return FamilyResult(False, v, detail)
    return FamilyResult(True)


def validate_trajectory(scenario: Scenario, trajectory: Trajectory) -> ValidationReport:
    """Check every constraint family of the dynamic model on a recorded run.

    Violation coordinates use 0-based agent/task indices and 1-based periods.
    """
    H = scenario.horizon
    n_all, m = len(trajectory.alpha), scenario.n_tasks
    alpha = np.asarray(trajectory.alpha, dtype=np.int64).reshape(n_all, -1)
    beta = np.asarray(trajectory.beta, dtype=np.int64).reshape(m, -1)
    arrivals = trajectory.agent_arrivals
    x = trajectory.x() if trajectory.decisions else np.zeros((0, n_all, m), dtype=np.int64)
    demand = np.array([scenario.task_demand(j) for j in range(m)], dtype=np.int64)
    fam: dict[str, FamilyResult] = {}

    fam["shape"] = _first(
        (("periods", len(trajectory.decisions)),) if len(trajectory.decisions) != H or alpha.shape[1] != H
        or beta.shape[1] != H or len(arrivals) != n_all or len(trajectory.agent_origin) != n_all
        else (),
        "trajectory does not span the horizon",
    )
    if not fam["shape"].passed:
        return ValidationReport(fam)

    a_hat = np.zeros((n_all, H + 2), dtype=np.int64)
    for i, a in enumerate(arrivals):
        if a is not None:
            a_hat[i, a] = 1
    t_hat = np.zeros((m, H + 2), dtype=np.int64)
    for j, a in enumerate(scenario.task_arrivals):
        if a is not None:
            t_hat[j, a] = 1

    def binary():
        for name, arr in (("alpha", alpha), ("beta", beta)):
            for idx in zip(*np.nonzero((arr != 0) & (arr != 1))):
                yield (name, int(idx[0]), int(idx[1]) + 1)
        for t, i, j in zip(*np.nonzero(x > 1)):
            yield ("x", int(i), int(j), int(t) + 1)

    fam["binary"] = _first(binary(), "variables must be 0/1")

    def arrival_rule():
        for i in range(scenario.n_agents):
            if arrivals[i] != scenario.agent_arrivals[i]:
                yield ("agent", i)
        for i in range(scenario.n_agents, n_all):
            o = trajectory.agent_origin[i]
            if arrivals[i] is None or not (0 <= o < scenario.n_agents):
                yield ("agent", i)

    fam["arrivals"] = _first(arrival_rule(), "arrival record disagrees with the scenario")

    def initial():
        for i in np.flatnonzero(alpha[:, 0] != a_hat[:, 1]):
            yield ("alpha", int(i), 1)
        for j in np.flatnonzero(beta[:, 0] != t_hat[:, 1]):
            yield ("beta", int(j), 1)

    fam["initial"] = _first(initial(), "initial availability must equal period-1 arrivals")

    def availability():
        for t in range(H):
            row = x[t].sum(axis=1)
            for i in np.flatnonzero(row > alpha[:, t]):
                yield ("agent", int(i), t + 1)
            col = x[t].sum(axis=0)
            for j in np.flatnonzero((col > 0) & ((col != demand) | (beta[:, t] == 0))):
                yield ("task", int(j), t + 1)

    fam["availability"] = _first(availability(), "assignment exceeds availability")

    def conservation():
        for t in range(H - 1):
            exp_a = alpha[:, t] - x[t].sum(axis=1) + a_hat[:, t + 2]
            for i in np.flatnonzero(alpha[:, t + 1] != exp_a):
                yield ("alpha", int(i), t + 2)
            served = x[t].sum(axis=0)
            exp_b = beta[:, t] * demand - served + t_hat[:, t + 2] * demand
            for j in np.flatnonzero(beta[:, t + 1] * demand != exp_b):
                yield ("beta", int(j), t + 2)

    fam["conservation"] = _first(conservation(), "availability update identity broken")

    def renewal():
        if not scenario.renewable:
            for i in range(scenario.n_agents, n_all):
                yield ("agent", i)
            return
        finished: dict[int, list[int]] = {}
        for t, period in enumerate(trajectory.decisions, start=1):
            for i, j in period:
                d = int(scenario.service_durations[trajectory.agent_origin[i], j])
                if t + d <= H:
                    finished.setdefault(trajectory.agent_origin[i], []).append(t + d)
        for i in range(scenario.n_agents, n_all):
            o = trajectory.agent_origin[i]
            if arrivals[i] not in finished.get(o, []):
                yield ("agent", i)
            else:
                finished[o].remove(arrivals[i])
        for o, left in finished.items():
            if left:
                yield ("agent", o)

    fam["renewal"] = _first(renewal(), "re-entries must match completed services")

    def value():
        for t, period in enumerate(trajectory.decisions, start=1):
            expect = sum((scenario.utility(t, trajectory.agent_origin[i], j) for i, j in period), Fraction(0))
            if expect != trajectory.per_period_values[t - 1]:
                yield ("period", t)
        if sum(trajectory.per_period_values, Fraction(0)) != trajectory.total:
            yield ("total",)

    fam["objective"] = _first(value(), "recorded values disagree with the utilities")
    return ValidationReport(fam)


# -- clairvoyant ---------------------------------------------------------------


def clairvoyant_optimum(scenario: Scenario, *, limit: int = CLAIRVOYANT_SLOTS) -> Fraction:
    """Offline optimum of the multi-period model with full arrival knowledge.

    Once both parties have arrived a pair may be matched in any later period,
    so each agent-task pair is worth its best utility over its window and the
    search enumerates every partial injective agent-to-task map. Profit
    scenarios maximize the total; cost scenarios cover as many tasks as
    possible and minimize cost among those maps.
    """
    n, m = scenario.n_agents, scenario.n_tasks
    if n + m > limit:
        raise GuardExceeded(f"clairvoyant limit: {n + m} decision slots > {limit}")
    if scenario.renewable:
        raise ValueError("the clairvoyant optimum is defined for nonrenewable scenarios")
    if scenario.demand is not None and any(d > 1 for d in scenario.demand):
        raise ValueError("the clairvoyant optimum is defined for unit demands")
    maximize = scenario.sense is Sense.MAXIMIZE_PROFIT
    H = scenario.horizon
    best_pair: dict[tuple[int, int], int] = {}
    for i, a in enumerate(scenario.agent_arrivals):
        for j, b in enumerate(scenario.task_arrivals):
            if a is None or b is None:
                continue
            vals = [scenario.utility_numer(t, i, j) for t in range(max(a, b), H + 1)]
            best_pair[(i, j)] = max(vals) if maximize else min(vals)

    best: list = [None]

    def better(cand, cur) -> bool:
        if cur is None:
            return True
        if maximize:
            return cand[1] > cur[1]
        return (cand[0], -cand[1]) > (cur[0], -cur[1])

    def rec(i: int, used: frozenset, count: int, total: int):
        if i == n:
            if better((count, total), best[0]):
                best[0] = (count, total)
            return
        rec(i + 1, used, count, total)
        for j in range(m):
            if j not in used and (i, j) in best_pair:
                rec(i + 1, used | {j}, count + 1, total + best_pair[(i, j)])

    rec(0, frozenset(), 0, 0)
    return Fraction(best[0][1], scenario.scale)


# -- policies ------------------------------------------------------------------


def _global(view: PeriodView, pairs: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    return [(view.agents[i], view.tasks[j]) for i, j in pairs if i < len(view.agents) and j < len(view.tasks)]


class NullPolicy:
    """Never assigns anything."""

    name = "null"

    def __call__(self, view: PeriodView):
        return ()


class MyopicPolicy:
    """Optimal static assignment of the current period.

    Profit scenarios keep only pairs with positive realized utility, since a
    zero-value match would only use up availability. Cost scenarios match as
    many pairs as the period allows at minimum cost.
    """

    name = "myopic"

    def __call__(self, view: PeriodView):
        inst = view.instance
        if inst.sense is Sense.MAXIMIZE_PROFIT:
            return _global(view, solve_apraq(inst).pairs)
        square = pad_to_square(inst)
        agent_task = min_cost_assignment(square)
        return _global(view, ((i, int(j)) for i, j in enumerate(agent_task)))


class GreedyPolicy:
    """Take the best remaining pair of the period until none is worth taking."""

    name = "greedy"

    def __call__(self, view: PeriodView):
        inst = view.instance
        w = inst.effective_numer()
        maximize = inst.sense is Sense.MAXIMIZE_PROFIT
        order = sorted(
            ((int(w[i, j]), i, j) for i in range(inst.n_agents) for j in range(inst.n_tasks)),
            key=lambda e: (-e[0] if maximize else e[0], e[1], e[2]),
        )
        used_a, used_t, out = set(), set(), []
        for val, i, j in order:
            if maximize and val <= 0:
                break
            if i not in used_a and j not in used_t:
                used_a.add(i)
                used_t.add(j)
                out.append((i, j))
        return _global(view, out)


class VariantPolicy:
    """Solve one static variant on each period's availability submatrix.

    Objective variants run on the cost form of the period (profits become
    ``W - p``), padded to square with zero dummies. Reported per-period
    objective values are in utility units: for profit scenarios the
    bottleneck is the smallest matched utility and Σk sums the k smallest.
    """

    def __init__(self, target: Objective | SideConstraintSet | SemiAssignmentDemand):
        if isinstance(target, Objective):
            if target.kind not in ("sum", "bottleneck", "spread", "mindev", "ksum"):
                raise ValueError(f"unsupported objective {target}")
            self.name = f"variant-{target}"
        elif isinstance(target, SideConstraintSet):
            self.name = "variant-side-constraints"
        elif isinstance(target, SemiAssignmentDemand):
            self.name = "variant-semi-assignment"
        else:
            raise TypeError(f"unsupported per-period variant: {target!r}")
        self.target = target

    def __call__(self, view: PeriodView):
        t = self.target
        if isinstance(t, SideConstraintSet):
            return self._side_constraints(view)
        if isinstance(t, SemiAssignmentDemand):
            return self._semi_assignment(view)
        cost = view.instance.as_cost_instance()
        square = pad_to_square(cost)
        if t.kind == "sum":
            matching = Matching.from_assignment(min_cost_assignment(square))
        elif t.kind == "bottleneck":
            matching = solve_bottleneck(square).matching
        elif t.kind == "spread":
            matching = solve_fair_matching(square)[0]
        elif t.kind == "mindev":
            matching = solve_min_deviation(square)[0]
        else:
            k = min(t.k, cost.n_agents, cost.n_tasks)
            matching = solve_k_sum(square, k)[0]
        return _global(view, matching.pairs)

    def _side_constraints(self, view: PeriodView):
        inst = view.instance
        origin = [view.origin[i] for i in view.agents]
        cons = self.target.restrict(origin, view.tasks)
        if inst.sense is Sense.MAXIMIZE_PROFIT:
            w = inst.effective_numer()
            work = inst.with_numer(np.where(w > 0, w, 0).astype(w.dtype))
        else:
            work = inst
        try:
            matching = solve_with_side_constraints(pad_to_square(work), cons)
        except InfeasibleError:
            return ()
        pairs = [(i, j) for i, j in matching.pairs if i < inst.n_agents and j < inst.n_tasks]
        if inst.sense is Sense.MAXIMIZE_PROFIT:
            w = inst.effective_numer()
            kept = [(i, j) for i, j in pairs if w[i, j] > 0]
            if cons.satisfied(kept):
                pairs = kept
        return _global(view, pairs)

    def _semi_assignment(self, view: PeriodView):
        if view.demand is None or view.demand != tuple(self.target.d[j] for j in view.tasks):
            raise ValueError("semi-assignment policy demands must match the scenario's")
        inst = view.instance.as_cost_instance()
        d = list(view.demand)
        # admit categories in index order while enough agents remain
        chosen, room = [], inst.n_agents
        for c, dj in enumerate(d):
            if dj <= room:
                chosen.append(c)
                room -= dj
        if not chosen:
            return ()
        sub = inst.submatrix(range(inst.n_agents), chosen)
        cols = [d[c] for c in chosen]
        if room:
            numer = np.zeros((inst.n_agents, len(chosen) + 1), dtype=sub.numer.dtype)
            numer[:, : len(chosen)] = sub.numer
            sub = AssignmentInstance(numer, sub.scale, Sense.MINIMIZE_COST)
            cols.append(room)
        sap = solve_semi_assignment(sub, cols)
        return _global(view, ((i, chosen[c]) for i, c in sap.pairs() if c < len(chosen)))

    def evaluate(self, view: PeriodView, pairs: Sequence[tuple[int, int]]) -> Fraction | None:
        t = self.target
        if not isinstance(t, Objective):
            return sum((view.instance.weight(view.agents.index(i), view.tasks.index(j)) for i, j in pairs), Fraction(0))
        inst = view.instance
        local = Matching.from_pairs([(view.agents.index(i), view.tasks.index(j)) for i, j in pairs], inst.n_agents, inst.n_tasks)
        if t.kind == "ksum":
            t = Objective("ksum", min(t.k, len(local)))
        if inst.sense is Sense.MINIMIZE_COST or t.kind == "sum":
            return objective_value(inst, local, t)
        w = inst.effective_numer()
        neg = inst.with_numer(-w.astype(object) if w.dtype == object else -w, Sense.MINIMIZE_COST)
        val = objective_value(neg, local, t)
        return -val if t.kind in ("bottleneck", "ksum") else val


def per_period_variant_policy(target: Objective | SideConstraintSet | SemiAssignmentDemand | Sequence[int] | str) -> VariantPolicy:
    """Policy solving the given static variant every period.

    ``target`` is an objective (or its name), a side-constraint set over the
    scenario's agents x tasks, or a semi-assignment demand vector.
    """
    if isinstance(target, str):
        target = Objective.parse(target)
    elif not isinstance(target, (Objective, SideConstraintSet, SemiAssignmentDemand)):
        target = SemiAssignmentDemand(tuple(target))
    return VariantPolicy(target)


POLICIES: dict[str, Callable[[], PerPeriodPolicy]] = {
    "null": NullPolicy,
    "myopic": MyopicPolicy,
    "greedy": GreedyPolicy,
}


def make_policy(name: str) -> PerPeriodPolicy:
    """Policy by name: ``null``, ``myopic``, ``greedy`` or any objective name."""
    if name in POLICIES:
        return POLICIES[name]()
    return per_period_variant_policy(name)


def summary(scenario: Scenario, trajectory: Trajectory, clairvoyant: Fraction | None = None) -> dict:
    out = {
        "policy": trajectory.policy,
        "Z": str(trajectory.total),
        "periods": scenario.horizon,
        "assignments": sum(len(p) for p in trajectory.decisions),
        "unserved_tasks": len(trajectory.unserved_tasks(scenario)),
        "mode": scenario.mode.value,
    }
    if scenario.sense is Sense.MINIMIZE_COST:
        out["coverage_satisfied"] = trajectory.coverage_satisfied(scenario)
    if trajectory.objective_total is not None:
        out["objective_total"] = str(trajectory.objective_total)
    if clairvoyant is not None:
        out["clairvoyant"] = str(clairvoyant)
        gap = clairvoyant - trajectory.total
        out["regret"] = str(gap if scenario.sense is Sense.MAXIMIZE_PROFIT else -gap)
    return out
