"""Small graph routines on arc lists: max-flow, min-cost flow, path stripping.

Nodes are dense indices ``0..n-1``; an arc is ``(u, v, capacity[, cost])``.
"""

from __future__ import annotations

from collections import deque

import numpy as np

__all__ = ["max_flow", "min_cost_flow", "strip_paths"]

_EPS = 1e-12


def max_flow(n: int, arcs, s: int, t: int):
    """Edmonds-Karp.  Returns ``(value, flow_per_arc)``."""
    m = len(arcs)
    adj = [[] for _ in range(n)]
    cap = np.zeros(2 * m)
    to = np.zeros(2 * m, dtype=np.int64)
    for a, (u, v, c) in enumerate(arcs):
        cap[2 * a] = c
        to[2 * a], to[2 * a + 1] = v, u
        adj[u].append(2 * a)
        adj[v].append(2 * a + 1)
    value = 0.0
    if s == t:
        return value, np.zeros(m)
    while True:
        prev = [-1] * n
        prev[s] = -2
        q = deque([s])
        while q and prev[t] == -1:
            u = q.popleft()
            for r in adj[u]:
                if cap[r] > _EPS and prev[to[r]] == -1:
                    prev[to[r]] = r
                    q.append(to[r])
        if prev[t] == -1:
            break
        push, v = np.inf, t
        while v != s:
            r = prev[v]
            push = min(push, cap[r])
            v = to[r ^ 1]
        v = t
        while v != s:
            r = prev[v]
            cap[r] -= push
            cap[r ^ 1] += push
            v = to[r ^ 1]
        value += push
    flow = np.array([cap[2 * a + 1] for a in range(m)])
    return value, flow


def min_cost_flow(n: int, arcs, s: int, t: int, amount: float):
    """Successive shortest paths with Bellman-Ford on the residual graph.

    Costs may be any reals as long as the input graph has no negative cycle
    (always true on a DAG).  Among equal-cost paths the one found first in arc
    order wins, which keeps results deterministic.  Returns ``(cost, flow)``
    or ``None`` when ``amount`` cannot be routed.
    """
    m = len(arcs)
    cap = np.zeros(2 * m)
    cost = np.zeros(2 * m)
    frm = np.zeros(2 * m, dtype=np.int64)
    to = np.zeros(2 * m, dtype=np.int64)
    for a, (u, v, c, w) in enumerate(arcs):
        cap[2 * a], cost[2 * a], cost[2 * a + 1] = c, w, -w
        frm[2 * a], to[2 * a] = u, v
        frm[2 * a + 1], to[2 * a + 1] = v, u
    left = amount
    total = 0.0
    while left > 1e-9:
        dist = [np.inf] * n
        prev = [-1] * n
        dist[s] = 0.0
        for _ in range(n):
            changed = False
            for r in range(2 * m):
                if cap[r] > _EPS:
                    u = frm[r]
                    du = dist[u]
                    if du < np.inf and du + cost[r] < dist[to[r]] - 1e-15:
                        dist[to[r]] = du + cost[r]
                        prev[to[r]] = r
                        changed = True
            if not changed:
                break
        if dist[t] == np.inf:
            return None
        push, v = left, t
        while v != s:
            r = prev[v]
            push = min(push, cap[r])
            v = frm[r]
        v = t
        while v != s:
            r = prev[v]
            cap[r] -= push
            cap[r ^ 1] += push
            v = frm[r]
        total += push * dist[t]
        left -= push
    flow = np.array([cap[2 * a + 1] for a in range(m)])
    return total, flow


def strip_paths(n: int, arcs, flow, s: int, t: int):
    """Decompose an integral s-t flow on a DAG into unit paths.

    ``flow`` holds non-negative integers per arc.  Each stripped path is the
    lexicographically smallest by arc index among the arcs still carrying
    flow.  Returns a list of arc-index lists (one per unit).
    """
    rem = [int(v) for v in flow]
    out_arcs = [[] for _ in range(n)]
    for a, (u, v, *_rest) in enumerate(arcs):
        out_arcs[u].append(a)
    paths = []
    while True:
        path, u = [], s
        seen = 0
        while u != t:
            nxt = next((a for a in out_arcs[u] if rem[a] > 0), None)
            if nxt is None:
                break
            path.append(nxt)
            u = arcs[nxt][1]
            seen += 1
            if seen > len(arcs):
                raise ValueError("flow contains a cycle")
        if u != t or not path:
            break
        for a in path:
            rem[a] -= 1
        paths.append(path)
    return paths
