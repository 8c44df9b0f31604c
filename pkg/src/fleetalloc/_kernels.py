"""Inner loops of the LAP solvers.

Each kernel is plain Python over numpy arrays, compiled with numba for int64
input. For object arrays (numerators beyond int64 headroom) callers use the
``.py_func`` attribute, which runs the identical source on Python ints.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def hungarian_kernel(a, u, v, p, inf):
    """Primal-dual Hungarian method on square cost matrix ``a``.

    Rows are tree roots. ``u`` (rows) and ``v`` (columns) are 1-indexed dual
    potentials with a spare slot 0; they must start dual feasible. ``p[j]`` is
    the 1-indexed row matched to column ``j`` (0: free) and must only contain
    tight pairs. On return every row is matched and the duals are optimal.
    """
    n = a.shape[0]
    minv = np.empty(n + 1, dtype=u.dtype)
    way = np.zeros(n + 1, dtype=np.int64)
    used = np.zeros(n + 1, dtype=np.bool_)
    row_done = np.zeros(n + 1, dtype=np.bool_)
    for j in range(1, n + 1):
        if p[j] != 0:
            row_done[p[j]] = True
    for i in range(1, n + 1):
        if row_done[i]:
            continue
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = inf
            used[j] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = -1
            for j in range(1, n + 1):
                if not used[j]:
                    cur = a[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
        row_done[i] = True


@njit(cache=True)
def greedy_tight_kernel(a, u, v, p):
    """Seed ``p`` with a greedy matching on zero-reduced-cost pairs."""
    n = a.shape[0]
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if p[j] == 0 and a[i - 1, j - 1] - u[i] - v[j] == 0:
                p[j] = i
                break


@njit(cache=True)
def auction_kernel(c, prices, eps, agent_task, task_agent, max_rounds, history):
    """Jacobi auction: every unassigned agent bids once per round.

    Agents minimize ``c[i, j] + prices[j]``. A bid raises the price to
    ``prices[j] + gamma + eps`` where ``gamma`` is the gap between the best
    and second-best values. Each task goes to its highest bid, lowest agent
    index on ties. Returns the number of rounds, or ``-rounds`` if the
    ``max_rounds`` guard fired before every agent was assigned.
    """
    n = c.shape[0]
    unassigned = 0
    for i in range(n):
        if agent_task[i] < 0:
            unassigned += 1
    bid_val = np.empty(n, dtype=prices.dtype)
    bidder = np.full(n, -1, dtype=np.int64)
    has_bid = np.zeros(n, dtype=np.bool_)
    rounds = 0
    while unassigned > 0:
        if rounds >= max_rounds:
            return -rounds
        rounds += 1
        for j in range(n):
            has_bid[j] = False
        for i in range(n):
            if agent_task[i] >= 0:
                continue
            best_j = 0
            best = c[i, 0] + prices[0]
            second = best
            have_second = False
            for j in range(1, n):
                val = c[i, j] + prices[j]
                if val < best:
                    second = best
                    have_second = True
                    best = val
                    best_j = j
                elif not have_second or val < second:
                    second = val
                    have_second = True
            gamma = second - best if have_second else best - best
            bid = prices[best_j] + gamma + eps
            if not has_bid[best_j] or bid > bid_val[best_j]:
                has_bid[best_j] = True
                bid_val[best_j] = bid
                bidder[best_j] = i
        for j in range(n):
            if has_bid[j]:
                prices[j] = bid_val[j]
                old = task_agent[j]
                if old >= 0:
                    agent_task[old] = -1
                    unassigned += 1
                task_agent[j] = bidder[j]
                agent_task[bidder[j]] = j
                unassigned -= 1
        if rounds <= history.shape[0]:
            for j in range(n):
                history[rounds - 1, j] = prices[j]
    return rounds
