"""Maximum-cardinality bipartite matching (Hopcroft-Karp)."""

from __future__ import annotations

from collections import deque
from typing import Iterable

import numpy as np

from .instance import Matching

_INF = float("inf")


def _hopcroft_karp(adj: list[list[int]], n_right: int) -> tuple[list[int], list[int]]:
    n_left = len(adj)
    match_l = [-1] * n_left
    match_r = [-1] * n_right
    dist = [0] * n_left

    def bfs() -> bool:
        queue = deque()
        for u in range(n_left):
            if match_l[u] < 0:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = _INF
        found = False
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                nxt = match_r[w]
                if nxt < 0:
                    found = True
                elif dist[nxt] == _INF:
                    dist[nxt] = dist[u] + 1
                    queue.append(nxt)
        return found

    def dfs(root: int) -> bool:
        # iterative layered DFS; stack holds (left vertex, next edge index)
        stack = [[root, 0]]
        path = []
        while stack:
            u, k = stack[-1]
            if k == len(adj[u]):
                dist[u] = _INF
                stack.pop()
                if path:
                    path.pop()
                continue
            stack[-1][1] = k + 1
            w = adj[u][k]
            nxt = match_r[w]
            if nxt < 0:
                path.append(w)
                lefts = [s[0] for s in stack]
                for left, right in zip(lefts, path):
                    match_l[left] = right
                    match_r[right] = left
                return True
            if dist[nxt] == dist[u] + 1:
                path.append(w)
                stack.append([nxt, 0])
        return False

    while bfs():
        for u in range(n_left):
            if match_l[u] < 0:
                dfs(u)
    return match_l, match_r


def max_cardinality_matching(
    edges: Iterable[tuple[int, int]],
    n_agents: int | None = None,
    n_tasks: int | None = None,
) -> Matching:
    """Maximum matching of the bipartite graph given by ``edges``.

    Neighbours are scanned in ascending task order, so the result is
    deterministic for a given edge set.
    """
    edges = sorted({(int(i), int(j)) for i, j in edges})
    if n_agents is None:
        n_agents = max((i for i, _ in edges), default=-1) + 1
    if n_tasks is None:
        n_tasks = max((j for _, j in edges), default=-1) + 1
    adj: list[list[int]] = [[] for _ in range(n_agents)]
    for i, j in edges:
        if not (0 <= i < n_agents and 0 <= j < n_tasks):
            raise ValueError(f"edge {(i, j)} outside {n_agents}x{n_tasks}")
        adj[i].append(j)
    match_l, _ = _hopcroft_karp(adj, n_tasks)
    pairs = [(i, j) for i, j in enumerate(match_l) if j >= 0]
    return Matching.from_pairs(pairs, n_agents, n_tasks)


def matching_on_mask(mask: np.ndarray) -> Matching:
    """Maximum matching using the pairs where ``mask`` is true."""
    n, m = mask.shape
    adj = [np.flatnonzero(mask[i]).tolist() for i in range(n)]
    match_l, _ = _hopcroft_karp(adj, m)
    return Matching.from_pairs([(i, j) for i, j in enumerate(match_l) if j >= 0], n, m)
