"""Brute-force reference solver.

Enumerates every feasible candidate for the problem shape and keeps all
optima. It shares only the value types with the solvers, never their code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations
from typing import Sequence

import numpy as np

from .errors import GuardExceeded
from .instance import SUM, AssignmentInstance, Objective, Sense, SideConstraintSet

ORACLE_LIMIT = 9
CANDIDATE_LIMIT = 5_000_000


@dataclass(frozen=True)
class OracleResult:
    best_value: Fraction
    best_matchings: tuple[tuple[tuple[int, int], ...], ...]
    enumerated: int


def _guard(n: int, m: int) -> None:
    small, large = min(n, m), max(n, m)
    if small > ORACLE_LIMIT:
        raise GuardExceeded(f"oracle limit: min(n, m) = {small} > {ORACLE_LIMIT}")
    count = math.perm(large, small)
    if count > CANDIDATE_LIMIT:
        raise GuardExceeded(f"oracle limit: {count} candidates > {CANDIDATE_LIMIT}")


def _scores(w: np.ndarray, objective: Objective, factor: int) -> np.ndarray:
    """Objective per candidate row of matched numerators ``w`` (K x r)."""
    kind = objective.kind
    if kind == "sum":
        return w.sum(axis=1)
    if w.shape[1] == 0:
        raise ValueError("undefined objective on empty matching")
    if kind == "bottleneck":
        return w.max(axis=1)
    if kind == "spread":
        return w.max(axis=1) - w.min(axis=1)
    if kind == "mindev":
        return factor * w.max(axis=1) - w.sum(axis=1)
    if objective.k > w.shape[1]:
        raise ValueError(f"k={objective.k} exceeds the {w.shape[1]} matched pairs")
    return np.sort(w, axis=1)[:, ::-1][:, : objective.k].sum(axis=1)


def _pick(values: np.ndarray, maximize: bool) -> tuple[object, np.ndarray]:
    best = values.max() if maximize else values.min()
    return best, np.flatnonzero(values == best)


def _integer_usage(constraints: SideConstraintSet, n: int, m: int):
    mats, budgets = [], []
    for mat, b in zip(constraints.usage, constraints.budgets):
        denom = math.lcm(b.denominator, *(x.denominator for row in mat for x in row))
        mats.append(np.array([[int(x * denom) for x in row] for row in mat], dtype=object).reshape(n, m))
        budgets.append(int(b * denom))
    return mats, budgets


def _multiset_orders(counts: list[int]):
    """All distinct sequences using value ``j`` exactly ``counts[j]`` times."""
    total = sum(counts)
    seq = [0] * total

    def rec(pos: int):
        if pos == total:
            yield tuple(seq)
            return
        for j, left in enumerate(counts):
            if left:
                counts[j] -= 1
                seq[pos] = j
                yield from rec(pos + 1)
                counts[j] += 1

    yield from rec(0)


def brute_force(
    instance: AssignmentInstance,
    objective: Objective = SUM,
    *,
    demand: Sequence[int] | None = None,
    constraints: SideConstraintSet | None = None,
    qualification: bool = False,
) -> OracleResult:
    """Exact optimum of ``objective`` by exhaustive enumeration.

    Default candidates are the injective maps from the smaller real side into
    the larger one (perfect matchings when square). ``demand`` switches to
    demand-respecting agent-to-category maps, ``qualification`` to all partial
    matchings on qualified pairs (profit maximization), and ``constraints``
    filters by resource budgets. Padding of a padded instance is ignored.
    """
    n, m = instance.n_real_agents, instance.n_real_tasks
    w_all = np.array(instance.numer[:n, :m].tolist(), dtype=object)
    forbidden = np.asarray(instance.forbidden[:n, :m])
    maximize = instance.sense is Sense.MAXIMIZE_PROFIT
    if maximize and objective.kind != "sum":
        raise ValueError("profit instances support only the sum objective in the oracle")
    if instance.qualification is not None and maximize:
        w_all = np.where(instance.qualification[:n, :m], w_all, 0)
    scale = instance.scale

    if qualification:
        return _partial_matchings(instance, w_all, forbidden, objective, maximize)
    if demand is not None:
        return _demand_maps(w_all, forbidden, list(demand), objective, maximize, scale)

    _guard(n, m)
    flip = n > m
    w = w_all.T if flip else w_all
    forb = forbidden.T if flip else forbidden
    rows, cols = w.shape
    cand = np.array(list(permutations(range(cols), rows)), dtype=np.intp).reshape(-1, rows)
    idx = np.arange(rows)
    ok = ~forb[idx, cand].any(axis=1)
    if constraints is not None:
        constraints.check_shape(instance)
        mats, budgets = _integer_usage(constraints, n, m)
        for mat, b in zip(mats, budgets):
            mat = mat.T if flip else mat
            ok &= mat[idx, cand].sum(axis=1) <= b
    cand = cand[ok]
    if len(cand) == 0:
        return OracleResult(None, (), 0)
    values = _scores(w[idx, cand], objective, min(n, m))
    best, winners = _pick(values, maximize)
    matchings = []
    for r in winners:
        pairs = [(int(cand[r, k]), k) if flip else (k, int(cand[r, k])) for k in range(rows)]
        matchings.append(tuple(sorted(pairs)))
    return OracleResult(Fraction(int(best), scale), tuple(matchings), len(cand))


def _demand_maps(w, forbidden, demand, objective, maximize, scale) -> OracleResult:
    n, m = w.shape
    if len(demand) != m or sum(demand) != n:
        raise ValueError("demand must have one entry per category and sum to n")
    if n > ORACLE_LIMIT:
        raise GuardExceeded(f"oracle limit: n = {n} > {ORACLE_LIMIT}")
    cand = np.array(list(_multiset_orders(list(demand))), dtype=np.intp).reshape(-1, n)
    idx = np.arange(n)
    cand = cand[~forbidden[idx, cand].any(axis=1)]
    if len(cand) == 0:
        return OracleResult(None, (), 0)
    values = _scores(w[idx, cand], objective, min(n, m))
    best, winners = _pick(values, maximize)
    matchings = tuple(tuple((i, int(cand[r, i])) for i in range(n)) for r in winners)
    return OracleResult(Fraction(int(best), scale), matchings, len(cand))


def _partial_matchings(instance, w, forbidden, objective, maximize) -> OracleResult:
    if objective.kind != "sum" or not maximize:
        raise ValueError("qualified partial matchings are scored by maximum sum of profits")
    n, m = w.shape
    _guard(n, m)
    qual = (
        np.ones((n, m), dtype=bool)
        if instance.qualification is None
        else np.asarray(instance.qualification[: n, : m])
    )
    usable = qual & ~forbidden
    best = 0
    winners: list[tuple[tuple[int, int], ...]] = [()]
    count = 1  # the empty matching
    for size in range(1, min(n, m) + 1):
        perms = np.array(list(permutations(range(m), size)), dtype=np.intp).reshape(-1, size)
        for agents in combinations(range(n), size):
            a = np.array(agents, dtype=np.intp)
            ok = usable[a, perms].all(axis=1)
            cand = perms[ok]
            if len(cand) == 0:
                continue
            count += len(cand)
            values = w[a, cand].sum(axis=1)
            top = values.max()
            if top < best:
                continue
            hits = [tuple(zip(agents, map(int, cand[r]))) for r in np.flatnonzero(values == top)]
            if top > best:
                best, winners = top, hits
            else:
                winners.extend(hits)
    return OracleResult(Fraction(int(best), instance.scale), tuple(winners), count)
