"""Core value types: assignment instances, matchings, dual certificates, objectives.

Weights are exact rationals stored as an integer numerator matrix over a
common positive denominator (``scale``). Solvers work on the integer matrix
directly, so every comparison they make is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

# numerators beyond this magnitude are kept as Python ints (object arrays)
INT64_SAFE = 2**62


class Sense(str, Enum):
    MINIMIZE_COST = "min"
    MAXIMIZE_PROFIT = "max"

    @classmethod
    def parse(cls, value: str | Sense) -> Sense:
        if isinstance(value, Sense):
            return value
        key = str(value).strip().lower()
        aliases = {
            "min": cls.MINIMIZE_COST,
            "minimize": cls.MINIMIZE_COST,
            "minimizecost": cls.MINIMIZE_COST,
            "cost": cls.MINIMIZE_COST,
            "max": cls.MAXIMIZE_PROFIT,
            "maximize": cls.MAXIMIZE_PROFIT,
            "maximizeprofit": cls.MAXIMIZE_PROFIT,
            "profit": cls.MAXIMIZE_PROFIT,
        }
        if key not in aliases:
            raise ValueError(f"unknown sense {value!r}")
        return aliases[key]


def to_fraction(value) -> Fraction:
    """Exact conversion of ints, rationals, decimal strings and floats.

    Floats are read through their shortest decimal repr, so ``0.1`` becomes
    ``1/10`` rather than the binary approximation.
    """
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("boolean is not a weight")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise ValueError(f"non-finite weight {value!r}")
        return Fraction(repr(float(value)))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational")


def _int_array(values: Sequence[int], shape: tuple[int, ...]) -> np.ndarray:
    if all(-INT64_SAFE < v < INT64_SAFE for v in values):
        return np.array(values, dtype=np.int64).reshape(shape)
    out = np.empty(len(values), dtype=object)
    out[:] = [int(v) for v in values]
    return out.reshape(shape)


def scale_rationals(values: Iterable, shape: tuple[int, ...]) -> tuple[np.ndarray, int]:
    """Return integer numerators and the common denominator of ``values``."""
    fracs = [to_fraction(v) for v in values]
    scale = 1
    for f in fracs:
        scale = math.lcm(scale, f.denominator)
    numer = [f.numerator * (scale // f.denominator) for f in fracs]
    return _int_array(numer, shape), scale


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AssignmentInstance:
    """A weighted bipartite agent x task problem.

    ``numer[i, j] / scale`` is the cost (``MINIMIZE_COST``) or profit
    (``MAXIMIZE_PROFIT``) of pairing agent ``i`` with task ``j``. Pairs marked
    in ``forbidden`` may never be matched. ``real_shape`` is set on padded
    instances; rows/columns at or beyond it are zero-weight dummies.
    """

    numer: np.ndarray
    scale: int = 1
    sense: Sense = Sense.MINIMIZE_COST
    qualification: np.ndarray | None = None
    forbidden: np.ndarray | None = None
    real_shape: tuple[int, int] | None = None

    def __post_init__(self):
        numer = np.asarray(self.numer)
        if numer.ndim != 2 or numer.shape[0] < 1 or numer.shape[1] < 1:
            raise ValueError(f"weights must be a non-empty matrix, got shape {numer.shape}")
        if numer.dtype != np.int64 and numer.dtype != object:
            if not np.issubdtype(numer.dtype, np.integer):
                raise TypeError("numerators must be integers; use AssignmentInstance.from_matrix")
            numer = numer.astype(np.int64)
        if self.scale < 1:
            raise ValueError("scale must be a positive integer")
        object.__setattr__(self, "numer", _frozen(numer))
        object.__setattr__(self, "sense", Sense.parse(self.sense))
        shape = numer.shape
        if self.qualification is not None:
            q = np.asarray(self.qualification, dtype=bool)
            if q.shape != shape:
                raise ValueError(f"qualification shape {q.shape} != weights shape {shape}")
            object.__setattr__(self, "qualification", _frozen(q))
        forbidden = (
            np.zeros(shape, dtype=bool) if self.forbidden is None else np.asarray(self.forbidden, dtype=bool)
        )
        if forbidden.shape != shape:
            raise ValueError(f"forbidden shape {forbidden.shape} != weights shape {shape}")
        object.__setattr__(self, "forbidden", _frozen(forbidden))
        if self.real_shape is not None:
            rn, rm = self.real_shape
            if not (1 <= rn <= shape[0] and 1 <= rm <= shape[1]):
                raise ValueError(f"real_shape {self.real_shape} outside {shape}")
            object.__setattr__(self, "real_shape", (int(rn), int(rm)))

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def from_matrix(
        cls,
        rows,
        sense: Sense | str = Sense.MINIMIZE_COST,
        qualification=None,
        forbidden=None,
    ) -> AssignmentInstance:
        if isinstance(rows, np.ndarray) and np.issubdtype(rows.dtype, np.integer):
            return cls(rows.astype(np.int64), 1, Sense.parse(sense), qualification, forbidden)
        rows = [list(r) for r in rows]
        if not rows or not rows[0]:
            raise ValueError("weights must be a non-empty matrix")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("ragged weight matrix")
        numer, scale = scale_rationals([x for r in rows for x in r], (len(rows), width))
        return cls(numer, scale, Sense.parse(sense), qualification, forbidden)

    # -- shape ---------------------------------------------------------------

    @property
    def n_agents(self) -> int:
        return self.numer.shape[0]

    @property
    def n_tasks(self) -> int:
        return self.numer.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.numer.shape

    @property
    def is_square(self) -> bool:
        return self.n_agents == self.n_tasks

    @property
    def n_real_agents(self) -> int:
        return self.real_shape[0] if self.real_shape else self.n_agents

    @property
    def n_real_tasks(self) -> int:
        return self.real_shape[1] if self.real_shape else self.n_tasks

    def is_dummy_pair(self, i: int, j: int) -> bool:
        return i >= self.n_real_agents or j >= self.n_real_tasks

    # -- weights -------------------------------------------------------------

    @property
    def allowed(self) -> np.ndarray:
        return ~self.forbidden

    def effective_numer(self) -> np.ndarray:
        """Numerators with unqualified pairs zeroed under profit maximization."""
        if self.qualification is None or self.sense is Sense.MINIMIZE_COST:
            return self.numer
        return np.where(self.qualification, self.numer, 0).astype(self.numer.dtype)

    def weight(self, i: int, j: int) -> Fraction:
        return Fraction(int(self.effective_numer()[i, j]), self.scale)

    def weights(self) -> list[list[Fraction]]:
        eff = self.effective_numer()
        return [[Fraction(int(x), self.scale) for x in row] for row in eff]

    def max_abs_weight(self) -> Fraction:
        eff = self.effective_numer()
        vals = np.abs(eff[self.allowed]) if self.allowed.any() else np.zeros(1, dtype=np.int64)
        return Fraction(int(vals.max()), self.scale)

    def is_integral(self) -> bool:
        return self.scale == 1

    # -- derived instances ---------------------------------------------------

    def as_cost_instance(self) -> AssignmentInstance:
        """Minimization twin: ``c = W - p`` with ``W`` the largest allowed profit."""
        if self.sense is Sense.MINIMIZE_COST:
            return self
        eff = self.effective_numer()
        allowed = self.allowed
        top = int(eff[allowed].max()) if allowed.any() else 0
        cost = (top - eff.astype(object)) if eff.dtype == object else top - eff
        return AssignmentInstance(cost, self.scale, Sense.MINIMIZE_COST, None, self.forbidden, self.real_shape)

    def with_forbidden(self, mask: np.ndarray) -> AssignmentInstance:
        return AssignmentInstance(
            self.numer, self.scale, self.sense, self.qualification, np.asarray(mask, dtype=bool), self.real_shape
        )

    def with_numer(self, numer: np.ndarray, sense: Sense | None = None) -> AssignmentInstance:
        return AssignmentInstance(
            numer, self.scale, sense or self.sense, self.qualification, self.forbidden, self.real_shape
        )

    def submatrix(self, agents: Sequence[int], tasks: Sequence[int]) -> AssignmentInstance:
        ai = np.asarray(agents, dtype=np.intp)
        ti = np.asarray(tasks, dtype=np.intp)
        q = None if self.qualification is None else self.qualification[np.ix_(ai, ti)]
        return AssignmentInstance(
            self.numer[np.ix_(ai, ti)], self.scale, self.sense, q, self.forbidden[np.ix_(ai, ti)]
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, AssignmentInstance):
            return NotImplemented
        if self.shape != other.shape or self.sense != other.sense or self.real_shape != other.real_shape:
            return False
        if (self.qualification is None) != (other.qualification is None):
            return False
        if self.qualification is not None and not np.array_equal(self.qualification, other.qualification):
            return False
        if not np.array_equal(self.forbidden, other.forbidden):
            return False
        # compare as rationals: a*s' == b*s
        lhs = self.numer.astype(object) * other.scale
        rhs = other.numer.astype(object) * self.scale
        return bool(np.all(lhs == rhs))

    def __repr__(self) -> str:
        return (
            f"AssignmentInstance({self.n_agents}x{self.n_tasks}, sense={self.sense.value}, "
            f"scale={self.scale}, forbidden={int(self.forbidden.sum())})"
        )


@dataclass(frozen=True)
class Matching:
    """A conflict-free set of (agent, task) pairs, stored sorted by agent."""

    pairs: tuple[tuple[int, int], ...]
    is_perfect: bool = False

    def __post_init__(self):
        pairs = tuple(sorted((int(i), int(j)) for i, j in self.pairs))
        agents = [i for i, _ in pairs]
        tasks = [j for _, j in pairs]
        if len(set(agents)) != len(agents):
            raise ValueError(f"agent matched twice in {pairs}")
        if len(set(tasks)) != len(tasks):
            raise ValueError(f"task matched twice in {pairs}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], n_agents: int | None = None, n_tasks: int | None = None):
        pairs = tuple(pairs)
        perfect = n_agents is not None and n_agents == n_tasks and len(pairs) == n_agents
        return cls(pairs, perfect)

    @classmethod
    def from_assignment(cls, agent_to_task: Sequence[int], n_tasks: int | None = None) -> Matching:
        """Build from a vector where entry ``i`` is agent ``i``'s task (negative: unmatched)."""
        pairs = [(i, int(j)) for i, j in enumerate(agent_to_task) if j >= 0]
        n_tasks = len(agent_to_task) if n_tasks is None else n_tasks
        return cls.from_pairs(pairs, len(agent_to_task), n_tasks)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def agent_to_task(self) -> dict[int, int]:
        return dict(self.pairs)

    def task_to_agent(self) -> dict[int, int]:
        return {j: i for i, j in self.pairs}

    def without_dummies(self, instance: AssignmentInstance) -> Matching:
        """Drop pairs that touch padding and re-evaluate perfection on the real shape."""
        real = [(i, j) for i, j in self.pairs if not instance.is_dummy_pair(i, j)]
        return Matching.from_pairs(real, instance.n_real_agents, instance.n_real_tasks)


@dataclass(frozen=True)
class DualState:
    """Dual potentials ``u`` (agents) and ``v`` (tasks); prices are ``-v``."""

    u: tuple[Fraction, ...]
    v: tuple[Fraction, ...]
    epsilon: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(to_fraction(x) for x in self.u))
        object.__setattr__(self, "v", tuple(to_fraction(x) for x in self.v))
        object.__setattr__(self, "epsilon", to_fraction(self.epsilon))
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    @property
    def prices(self) -> tuple[Fraction, ...]:
        return tuple(-x for x in self.v)

    def value(self) -> Fraction:
        return sum(self.u, Fraction(0)) + sum(self.v, Fraction(0))

    def feasibility_violations(self, instance: AssignmentInstance) -> list[tuple[int, int]]:
        """Allowed pairs with ``u_i + v_j > c_ij`` on the cost form of ``instance``."""
        cost = instance.as_cost_instance()
        c = cost.numer
        bad = []
        for i in range(cost.n_agents):
            for j in range(cost.n_tasks):
                if cost.forbidden[i, j]:
                    continue
                if self.u[i] + self.v[j] > Fraction(int(c[i, j]), cost.scale):
                    bad.append((i, j))
        return bad

    def is_feasible(self, instance: AssignmentInstance) -> bool:
        return not self.feasibility_violations(instance)

    def cs_violations(self, instance: AssignmentInstance, matching: Matching) -> list[tuple[int, int]]:
        """Matched pairs breaking (epsilon-)complementary slackness.

        With ``epsilon == 0`` a matched pair must have zero reduced cost.
        Otherwise ``c_ij + p_j <= min_k (c_ik + p_k) + epsilon`` must hold.
        """
        cost = instance.as_cost_instance()
        c = cost.numer
        p = self.prices
        bad = []
        for i, j in matching:
            cij = Fraction(int(c[i, j]), cost.scale)
            if self.epsilon == 0:
                if cij - self.u[i] - self.v[j] != 0:
                    bad.append((i, j))
                continue
            best = min(
                Fraction(int(c[i, k]), cost.scale) + p[k] for k in range(cost.n_tasks) if not cost.forbidden[i, k]
            )
            if cij + p[j] > best + self.epsilon:
                bad.append((i, j))
        return bad


@dataclass(frozen=True)
class SideConstraintSet:
    """Knapsack-type budgets: ``sum r_ijk x_ij <= b_k`` for every resource ``k``."""

    usage: tuple[tuple[tuple[Fraction, ...], ...], ...]
    budgets: tuple[Fraction, ...]

    def __post_init__(self):
        usage = tuple(tuple(tuple(to_fraction(x) for x in row) for row in mat) for mat in self.usage)
        budgets = tuple(to_fraction(b) for b in self.budgets)
        if len(usage) != len(budgets):
            raise ValueError("one budget per usage matrix required")
        if any(b < 0 for b in budgets):
            raise ValueError("budgets must be nonnegative")
        for mat in usage:
            if len({len(r) for r in mat}) > 1:
                raise ValueError("ragged usage matrix")
        object.__setattr__(self, "usage", usage)
        object.__setattr__(self, "budgets", budgets)

    @classmethod
    def single(cls, usage, budget) -> SideConstraintSet:
        return cls((tuple(map(tuple, usage)),), (budget,))

    def __len__(self) -> int:
        return len(self.budgets)

    def check_shape(self, instance: AssignmentInstance) -> None:
        n, m = instance.n_real_agents, instance.n_real_tasks
        for k, mat in enumerate(self.usage):
            if len(mat) != n or any(len(r) != m for r in mat):
                raise ValueError(f"resource {k} usage is not {n}x{m}")

    def consumption(self, pairs: Iterable[tuple[int, int]]) -> tuple[Fraction, ...]:
        pairs = list(pairs)
        out = []
        for mat in self.usage:
            n, m = len(mat), len(mat[0]) if mat else 0
            out.append(sum((mat[i][j] for i, j in pairs if i < n and j < m), Fraction(0)))
        return tuple(out)

    def satisfied(self, pairs: Iterable[tuple[int, int]]) -> bool:
        return all(used <= b for used, b in zip(self.consumption(pairs), self.budgets))

    def restrict(self, agents: Sequence[int], tasks: Sequence[int]) -> SideConstraintSet:
        usage = tuple(tuple(tuple(mat[i][j] for j in tasks) for i in agents) for mat in self.usage)
        return SideConstraintSet(usage, self.budgets)


@dataclass(frozen=True)
class Objective:
    """Objective kind; ``k`` is only meaningful for ``ksum``."""

    kind: str
    k: int | None = None

    KINDS = ("sum", "bottleneck", "spread", "mindev", "ksum")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown objective {self.kind!r}")
        if self.kind == "ksum" and (self.k is None or self.k < 1):
            raise ValueError("ksum objective needs k >= 1")

    @classmethod
    def parse(cls, text: str) -> Objective:
        text = text.strip().lower()
        if text.startswith("ksum"):
            _, _, k = text.partition(":")
            if not k:
                raise ValueError("ksum objective needs ':k'")
            return cls("ksum", int(k))
        aliases = {"fair": "spread", "min-deviation": "mindev", "min_deviation": "mindev"}
        return cls(aliases.get(text, text))

    def __str__(self) -> str:
        return f"ksum:{self.k}" if self.kind == "ksum" else self.kind


SUM = Objective("sum")
BOTTLENECK = Objective("bottleneck")
SPREAD = Objective("spread")
MIN_DEVIATION = Objective("mindev")


def ksum(k: int) -> Objective:
    return Objective("ksum", k)


def matched_weights(instance: AssignmentInstance, matching: Matching) -> list[Fraction]:
    """Weights of the real (non-dummy) matched pairs; rejects forbidden pairs."""
    out = []
    for i, j in matching:
        if i >= instance.n_agents or j >= instance.n_tasks:
            raise ValueError(f"pair {(i, j)} outside a {instance.n_agents}x{instance.n_tasks} instance")
        if instance.forbidden[i, j]:
            raise ValueError(f"pair {(i, j)} is forbidden")
        if instance.is_dummy_pair(i, j):
            continue
        out.append(instance.weight(i, j))
    return out


def objective_value(instance: AssignmentInstance, matching: Matching, objective: Objective = SUM) -> Fraction:
    """Evaluate ``objective`` on the matched weights of ``matching``.

    Dummy pairs of a padded instance never participate.
    """
    w = matched_weights(instance, matching)
    kind = objective.kind
    if kind == "sum":
        return sum(w, Fraction(0))
    if not w and kind in ("bottleneck", "spread", "mindev"):
        raise ValueError("undefined objective on empty matching")
    if kind == "bottleneck":
        return max(w)
    if kind == "spread":
        return max(w) - min(w)
    if kind == "mindev":
        return min(instance.n_real_agents, instance.n_real_tasks) * max(w) - sum(w, Fraction(0))
    k = objective.k
    if k > len(w):
        raise ValueError(f"k={k} exceeds the {len(w)} matched pairs")
    return sum(sorted(w, reverse=True)[:k], Fraction(0))


def pad_to_square(instance: AssignmentInstance) -> AssignmentInstance:
    """Add zero-weight dummy agents or tasks until the instance is square.

    Dummies are appended after the real indices, so original indices map to
    themselves; ``real_shape`` records where the padding starts.
    """
    n, m = instance.shape
    if n == m:
        return instance
    size = max(n, m)
    numer = np.zeros((size, size), dtype=instance.numer.dtype)
    numer[:n, :m] = instance.numer
    forbidden = np.zeros((size, size), dtype=bool)
    forbidden[:n, :m] = instance.forbidden
    qual = None
    if instance.qualification is not None:
        qual = np.ones((size, size), dtype=bool)
        qual[:n, :m] = instance.qualification
    real = instance.real_shape or (n, m)
    return AssignmentInstance(numer, instance.scale, instance.sense, qual, forbidden, real)
