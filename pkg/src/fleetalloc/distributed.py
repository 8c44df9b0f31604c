"""Synchronous message-passing simulation of the distributed auction and CBAA.

One node per agent. A round has a local step (bidding) followed by one
exchange in which every node sends its full table to each neighbour;
messages may be dropped independently with the topology's loss probability.
Equal bids are resolved in favour of the lower agent id in both protocols.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InfeasibleError, NonConvergence
from .instance import AssignmentInstance, Matching, Sense, objective_value, to_fraction
from .matching import matching_on_mask


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    adjacency: np.ndarray
    loss_probability: Fraction = Fraction(0)
    seed: int = 0

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] < 1:
            raise ValueError("adjacency must be a non-empty square matrix")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        np.fill_diagonal(adj, False)
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        loss = to_fraction(self.loss_probability)
        if not 0 <= loss <= 1:
            raise ValueError("loss probability must lie in [0, 1]")
        object.__setattr__(self, "loss_probability", loss)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, i: int) -> list[int]:
        return np.flatnonzero(self.adjacency[i]).tolist()

    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(np.triu(self.adjacency)))]

    def _eccentricity(self, source: int) -> int | None:
        dist = [-1] * self.n_nodes
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for w in self.neighbors(u):
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return None if min(dist) < 0 else max(dist)

    @property
    def is_connected(self) -> bool:
        return self._eccentricity(0) is not None

    @property
    def diameter(self) -> int | None:
        """Longest shortest path; None for a disconnected graph."""
        ecc = [self._eccentricity(i) for i in range(self.n_nodes)]
        return None if None in ecc else max(ecc)

    def with_loss(self, loss, seed: int | None = None) -> NetworkTopology:
        return NetworkTopology(self.adjacency, to_fraction(loss), self.seed if seed is None else seed)

    @classmethod
    def from_edges(cls, n: int, edges, loss=0, seed: int = 0) -> NetworkTopology:
        adj = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValueError(f"bad edge {(i, j)} for {n} nodes")
            adj[i, j] = adj[j, i] = True
        return cls(adj, to_fraction(loss), seed)

    @classmethod
    def complete(cls, n: int, **kw) -> NetworkTopology:
        return cls.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)], **kw)

    @classmethod
    def line(cls, n: int, **kw) -> NetworkTopology:
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)], **kw)

    @classmethod
    def ring(cls, n: int, **kw) -> NetworkTopology:
        edges = {(i, (i + 1) % n) for i in range(n) if n > 1 and i != (i + 1) % n}
        return cls.from_edges(n, sorted({tuple(sorted(e)) for e in edges}), **kw)

    @classmethod
    def erdos_renyi(cls, n: int, p: float, seed: int = 0, **kw) -> NetworkTopology:
        """Random G(n, p) graph joined with a random spanning tree so it is connected."""
        rng = np.random.default_rng(seed)
        edges = {(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p}
        order = rng.permutation(n).tolist()
        for k in range(1, n):
            a, b = order[k], order[int(rng.integers(k))]
            edges.add((min(a, b), max(a, b)))
        return cls.from_edges(n, sorted(edges), seed=seed, **kw)

    @classmethod
    def named(cls, kind: str, n: int, *, p: float = 0.3, **kw) -> NetworkTopology:
        if kind == "er":
            return cls.erdos_renyi(n, p, **kw)
        builders = {"complete": cls.complete, "ring": cls.ring, "line": cls.line}
        if kind not in builders:
            raise ValueError(f"unknown topology kind {kind!r}")
        return builders[kind](n, **kw)


@dataclass(frozen=True)
class RoundLog:
    round: int
    messages_sent: int
    messages_dropped: int
    conflicts_open: int
    digests: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "round": self.round,
            "messages_sent": self.messages_sent,
            "messages_dropped": self.messages_dropped,
            "conflicts_open": self.conflicts_open,
            "digests": list(self.digests),
        }


def _digest(payload) -> str:
    return hashlib.sha256(repr(payload).encode()).hexdigest()[:12]


# -- agents --------------------------------------------------------------------


class AuctionAgent:
    """Bidder with a private copy of every task's (price, holder).

    Costs and prices are integers in a common unit; the agent minimizes
    ``cost + price``.
    """

    def __init__(self, ident: int, costs: Sequence[int], eps: int):
        self.ident = ident
        self.costs = list(costs)
        self.eps = eps
        self.prices = [0] * len(costs)
        self.holders = [-1] * len(costs)

    @property
    def task(self) -> int | None:
        for j, h in enumerate(self.holders):
            if h == self.ident:
                return j
        return None

    def bid(self) -> bool:
        if self.task is not None:
            return False
        vals = [c + p for c, p in zip(self.costs, self.prices)]
        best_j = min(range(len(vals)), key=lambda j: (vals[j], j))
        rest = [v for j, v in enumerate(vals) if j != best_j]
        gamma = min(rest) - vals[best_j] if rest else 0
        self.prices[best_j] += gamma + self.eps
        self.holders[best_j] = self.ident
        return True

    def message(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return tuple(self.prices), tuple(self.holders)

    @staticmethod
    def _key(price: int, holder: int) -> tuple:
        return price, holder >= 0, -holder

    def receive(self, messages) -> bool:
        changed = False
        for prices, holders in messages:
            for j, (p, h) in enumerate(zip(prices, holders)):
                if self._key(p, h) > self._key(self.prices[j], self.holders[j]):
                    self.prices[j], self.holders[j] = p, h
                    changed = True
        return changed

    def claim_strength(self, task: int) -> tuple:
        return self.prices[task], -self.ident

    def digest(self) -> str:
        return _digest((self.prices, self.holders))


class CBAAAgent:
    """CBAA node: own selection ``x``, winning bids ``y`` and winners ``z``."""

    def __init__(self, ident: int, scores: Sequence[int]):
        self.ident = ident
        self.scores = list(scores)
        self.x: int | None = None
        self.y = [0] * len(scores)
        self.z = [-1] * len(scores)

    @property
    def task(self) -> int | None:
        return self.x

    def bid(self) -> bool:
        if self.x is not None:
            return False
        valid = [j for j, c in enumerate(self.scores) if (c, -self.ident) > (self.y[j], -self.z[j])]
        if not valid:
            return False
        j = min(valid, key=lambda k: (-self.scores[k], k))
        self.x = j
        self.y[j] = self.scores[j]
        self.z[j] = self.ident
        return True

    def message(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return tuple(self.y), tuple(self.z)

    def receive(self, messages) -> bool:
        changed = False
        for ys, zs in messages:
            for j, (y, z) in enumerate(zip(ys, zs)):
                if (y, -z) > (self.y[j], -self.z[j]):
                    self.y[j], self.z[j] = y, z
                    changed = True
        if self.x is not None and self.z[self.x] != self.ident:
            self.x = None
            changed = True
        return changed

    def claim_strength(self, task: int) -> tuple:
        return self.scores[task], -self.ident

    def digest(self) -> str:
        return _digest((self.x, self.y, self.z))


# -- simulation loop -----------------------------------------------------------


@dataclass(frozen=True)
class ProtocolResult:
    """Outcome of a protocol run.

    ``matching`` holds each task's strongest claimant when conflicts remain
    (only possible under message loss). ``inbox[r][i]`` lists the messages
    delivered to agent ``i`` in round ``r + 1`` when recording was requested.
    """

    matching: Matching
    rounds: int
    logs: tuple[RoundLog, ...]
    converged: bool
    conflicts_open: int
    prices: tuple[Fraction, ...] = ()
    inbox: tuple = field(default=(), repr=False)


def _conflicts(agents) -> int:
    claims: dict[int, int] = {}
    for a in agents:
        if a.task is not None:
            claims[a.task] = claims.get(a.task, 0) + 1
    return sum(1 for c in claims.values() if c > 1)


def _resolve(agents, n_tasks: int) -> Matching:
    winner: dict[int, object] = {}
    for a in agents:
        j = a.task
        if j is not None and (j not in winner or a.claim_strength(j) > winner[j].claim_strength(j)):
            winner[j] = a
    return Matching.from_pairs([(a.ident, j) for j, a in winner.items()], len(agents), n_tasks)


def _simulate(agents, topology: NetworkTopology, *, max_rounds: int, done, active=None, record: bool = False):
    """Run synchronous rounds until ``done(agents, quiet_rounds)`` or the round limit."""
    rng = np.random.default_rng(topology.seed)
    loss = topology.loss_probability
    threshold = float(loss)
    neighbors = [topology.neighbors(i) for i in range(topology.n_nodes)]
    logs: list[RoundLog] = []
    inbox_log = []
    quiet = 0
    for r in range(1, max_rounds + 1):
        changed = False
        for a in agents:
            if active is None or active(a):
                changed |= a.bid()
        outgoing = [a.message() for a in agents]
        inbox: list[list] = [[] for _ in agents]
        sent = dropped = 0
        for s in range(len(agents)):
            for t in neighbors[s]:
                sent += 1
                if loss and (loss == 1 or rng.random() < threshold):
                    dropped += 1
                else:
                    inbox[t].append((s, outgoing[s]))
        for a, msgs in zip(agents, inbox):
            changed |= a.receive([m for _, m in msgs])
        if record:
            inbox_log.append(tuple(tuple(m) for m in inbox))
        quiet = 0 if changed else quiet + 1
        conflicts = _conflicts(agents)
        logs.append(RoundLog(r, sent, dropped, conflicts, tuple(a.digest() for a in agents)))
        if done(agents, quiet, conflicts):
            return logs, True, tuple(inbox_log)
    return logs, False, tuple(inbox_log)


def _require_network(instance: AssignmentInstance, topology: NetworkTopology) -> int:
    if topology.n_nodes != instance.n_agents:
        raise ValueError(f"topology has {topology.n_nodes} nodes for {instance.n_agents} agents")
    if not topology.is_connected:
        raise ValueError("topology is disconnected")
    return topology.diameter


def _auction_units(instance: AssignmentInstance, epsilon: Fraction) -> tuple[list[list[int]], int, int, int]:
    """Integer costs, epsilon, unit and the forbidden-pair cost."""
    cost = instance.as_cost_instance()
    unit = math.lcm(cost.scale, epsilon.denominator)
    factor = unit // cost.scale
    c = [[int(x) * factor for x in row] for row in cost.numer.tolist()]
    eps = int(epsilon * unit)
    allowed = cost.allowed
    n = cost.n_agents
    top = max((abs(c[i][j]) for i in range(n) for j in range(n) if allowed[i, j]), default=0)
    big = 2 * n * top + n * eps + 1
    c = [[c[i][j] if allowed[i, j] else big for j in range(n)] for i in range(n)]
    return c, eps, unit, big


def auction_round_guard(n: int, diameter: int, big: int, eps: int) -> int:
    """Round limit for the lossless distributed auction, of order diameter * n * C / eps."""
    return (diameter + 1) * (4 * n * (2 * big // eps + 2) + 16)


def _auction_agents(instance: AssignmentInstance, epsilon) -> tuple[list[AuctionAgent], int, int]:
    epsilon = to_fraction(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not instance.is_square:
        raise ValueError("the distributed auction needs a square instance; use pad_to_square first")
    if len(matching_on_mask(instance.allowed)) < instance.n_agents:
        raise InfeasibleError("infeasible: no perfect matching avoids the forbidden pairs")
    c, eps, unit, big = _auction_units(instance, epsilon)
    return [AuctionAgent(i, row, eps) for i, row in enumerate(c)], unit, big


def _auction_done(agents, quiet, conflicts) -> bool:
    return conflicts == 0 and all(a.task is not None for a in agents)


def run_distributed_auction(
    instance: AssignmentInstance,
    topology: NetworkTopology,
    epsilon,
    *,
    max_rounds: int | None = None,
    record_messages: bool = False,
) -> ProtocolResult:
    """Auction in which prices travel only between neighbours.

    Unassigned agents bid against their local tables; tables merge by
    element-wise maximum of (price, holder) with the lower id winning ties.
    Stops once every agent holds a task and no task is claimed twice.
    """
    if topology.loss_probability:
        raise ValueError("run_distributed_auction is the lossless protocol; use run_lossy")
    diameter = _require_network(instance, topology)
    agents, unit, big = _auction_agents(instance, epsilon)
    guard = auction_round_guard(len(agents), diameter, big, agents[0].eps) if max_rounds is None else max_rounds
    logs, ok, inbox = _simulate(agents, topology, max_rounds=guard, done=_auction_done, record=record_messages)
    if not ok:
        raise NonConvergence(
            f"distributed auction did not finish within {guard} rounds",
            diagnostics={"rounds": guard, "conflicts_open": logs[-1].conflicts_open if logs else 0},
        )
    matching = _resolve(agents, instance.n_tasks)
    if any(instance.forbidden[i, j] for i, j in matching.pairs):
        raise InfeasibleError("infeasible: the auction could only finish on a forbidden pair")
    prices = _global_prices(agents, unit)
    return ProtocolResult(matching, len(logs), tuple(logs), True, 0, prices, inbox)


def _global_prices(agents: Sequence[AuctionAgent], unit: int) -> tuple[Fraction, ...]:
    n = len(agents[0].prices)
    return tuple(Fraction(max(a.prices[j] for a in agents), unit) for j in range(n))


def greedy_sequential(instance: AssignmentInstance) -> Matching:
    """Repeatedly fix the globally largest remaining score.

    Ties go to the lower agent index, then the lower task index. Only
    positive scores are ever taken, matching CBAA's bidding rule against
    an initial winning bid of zero.
    """
    if instance.sense is not Sense.MAXIMIZE_PROFIT:
        raise ValueError("greedy_sequential expects a MaximizeProfit instance")
    w = instance.effective_numer()
    n, m = instance.shape
    allowed = instance.allowed
    order = sorted(
        ((int(w[i, j]), i, j) for i in range(n) for j in range(m) if allowed[i, j] and w[i, j] > 0),
        key=lambda e: (-e[0], e[1], e[2]),
    )
    used_a, used_t, pairs = set(), set(), []
    for _, i, j in order:
        if i not in used_a and j not in used_t:
            used_a.add(i)
            used_t.add(j)
            pairs.append((i, j))
    return Matching.from_pairs(pairs, n, m)


def _cbaa_agents(instance: AssignmentInstance) -> list[CBAAAgent]:
    if instance.sense is not Sense.MAXIMIZE_PROFIT:
        raise ValueError("CBAA expects a MaximizeProfit instance")
    w = instance.effective_numer()
    allowed = instance.allowed
    return [
        CBAAAgent(i, [int(w[i, j]) if allowed[i, j] else 0 for j in range(instance.n_tasks)])
        for i in range(instance.n_agents)
    ]


def cbaa_round_guard(n: int, m: int, diameter: int) -> int:
    return 4 * (n + 1) * (m + 1) * (diameter + 1)


def _cbaa_done(diameter: int):
    need = max(diameter, 1)
    return lambda agents, quiet, conflicts: conflicts == 0 and quiet >= need


def run_cbaa(
    instance: AssignmentInstance,
    topology: NetworkTopology,
    sync: bool = True,
    *,
    max_rounds: int | None = None,
    record_messages: bool = False,
) -> ProtocolResult:
    """Consensus-based auction: local bidding, then max-consensus on winning bids.

    Terminates after ``diameter`` consecutive rounds without any state change
    and with no task claimed twice. With ``sync=False`` each agent only gets
    to bid in a seeded random half of the rounds.
    """
    diameter = _require_network(instance, topology)
    agents = _cbaa_agents(instance)
    guard = cbaa_round_guard(instance.n_agents, instance.n_tasks, diameter) if max_rounds is None else max_rounds
    if not sync:
        guard *= 4
    active = None
    if not sync:
        coin = np.random.default_rng([topology.seed, 1])
        active = lambda a: bool(coin.random() < 0.5)  # noqa: E731
    logs, ok, inbox = _simulate(
        agents, topology, max_rounds=guard, done=_cbaa_done(diameter), active=active, record=record_messages
    )
    if not ok and not topology.loss_probability:
        raise NonConvergence(
            f"CBAA did not finish within {guard} rounds",
            diagnostics={"rounds": guard, "conflicts_open": logs[-1].conflicts_open if logs else 0},
        )
    conflicts = logs[-1].conflicts_open if logs else 0
    return ProtocolResult(_resolve(agents, instance.n_tasks), len(logs), tuple(logs), ok, conflicts, (), inbox)


# -- lossy operation -----------------------------------------------------------


@dataclass(frozen=True)
class LossyOutcome:
    protocol: str
    loss: Fraction
    converged: bool
    rounds: int
    conflicts_open: int
    value: Fraction
    reference: Fraction
    value_ratio: Fraction | None
    logs: tuple[RoundLog, ...] = field(default=(), repr=False)

    def as_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "loss": str(self.loss),
            "converged": self.converged,
            "rounds": self.rounds,
            "conflicts_open": self.conflicts_open,
            "value": str(self.value),
            "reference": str(self.reference),
            "value_ratio": None if self.value_ratio is None else str(self.value_ratio),
        }


def _reference_value(instance: AssignmentInstance) -> Fraction:
    """Optimal Sum: the oracle within its guard, the Hungarian beyond it."""
    from .oracle import ORACLE_LIMIT, brute_force

    if min(instance.shape) <= ORACLE_LIMIT:
        return brute_force(instance).best_value
    from .lap import solve_hungarian

    matching, _ = solve_hungarian(instance)
    return objective_value(instance, matching)


def run_lossy(
    protocol: str,
    instance: AssignmentInstance,
    topology: NetworkTopology,
    max_rounds: int,
    *,
    epsilon=None,
) -> LossyOutcome:
    """Run ``protocol`` ("dauction" or "cbaa") with per-message drops.

    Never raises on non-convergence: the outcome reports whether the run
    finished within ``max_rounds``, the open conflicts, and the value of the
    deconflicted matching relative to the optimum.
    """
    _require_network(instance, topology)
    if protocol == "dauction":
        eps = to_fraction(epsilon) if epsilon is not None else Fraction(1, instance.n_agents + 1)
        agents, unit, _ = _auction_agents(instance, eps)
        logs, ok, _ = _simulate(agents, topology, max_rounds=max_rounds, done=_auction_done)
    elif protocol == "cbaa":
        agents = _cbaa_agents(instance)
        logs, ok, _ = _simulate(agents, topology, max_rounds=max_rounds, done=_cbaa_done(topology.diameter))
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    matching = _resolve(agents, instance.n_tasks)
    matching = Matching.from_pairs([(i, j) for i, j in matching.pairs if not instance.forbidden[i, j]], *instance.shape)
    value = objective_value(instance, matching) if len(matching) else Fraction(0)
    reference = _reference_value(instance)
    if instance.sense is Sense.MAXIMIZE_PROFIT:
        ratio = value / reference if reference > 0 else None
    else:
        ratio = reference / value if len(matching) == instance.n_agents and value > 0 else None
    return LossyOutcome(
        protocol, topology.loss_probability, ok, len(logs), logs[-1].conflicts_open if logs else 0,
        value, reference, ratio, tuple(logs),
    )


def loss_sweep(
    protocol: str,
    instances: Sequence[AssignmentInstance],
    topology_kind: str,
    levels: Sequence,
    *,
    seed: int = 0,
    max_rounds: int = 200,
    epsilon=None,
) -> list[dict]:
    """Mean value ratio and non-convergence rate of ``protocol`` per loss level."""
    rows = []
    for level in levels:
        loss = to_fraction(level)
        ratios, failures = [], 0
        for k, inst in enumerate(instances):
            topo = NetworkTopology.named(topology_kind, inst.n_agents, loss=loss, seed=seed + k)
            out = run_lossy(protocol, inst, topo, max_rounds, epsilon=epsilon)
            failures += not out.converged
            if out.value_ratio is not None:
                ratios.append(out.value_ratio)
        rows.append(
            {
                "loss": str(loss),
                "runs": len(instances),
                "nonconvergence_rate": str(Fraction(failures, len(instances))),
                "mean_value_ratio": str(sum(ratios, Fraction(0)) / len(ratios)) if ratios else None,
            }
        )
    return rows


def sweep_report(rows: list[dict]) -> str:
    """Canonical JSON text of a sweep, stable across reruns."""
    return json.dumps(rows, sort_keys=True, indent=2) + "\n"

