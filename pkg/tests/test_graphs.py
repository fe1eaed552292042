import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from netmix.graphs import max_flow, min_cost_flow, strip_paths


@st.composite
def dags(draw, with_cost=False):
    n = draw(st.integers(2, 7))
    arcs = []
    for u in range(n):
        for v in range(u + 1, n):
            if draw(st.booleans()):
                a = (u, v, draw(st.integers(1, 5)))
                if with_cost:
                    a += (draw(st.integers(0, 6)),)
                arcs.append(a)
    return n, arcs


def _nx(n, arcs):
    G = nx.DiGraph()
    G.add_nodes_from(range(n))
    for u, v, c, *rest in arcs:
        G.add_edge(u, v, capacity=c, weight=rest[0] if rest else 0)
    return G


def _conservation(n, arcs, flow, s, t):
    bal = np.zeros(n)
    for (u, v, *_), f in zip(arcs, flow):
        bal[u] -= f
        bal[v] += f
    return bal


@given(dags())
def test_max_flow_matches_networkx(g):
    n, arcs = g
    val, flow = max_flow(n, arcs, 0, n - 1)
    ref = nx.maximum_flow_value(_nx(n, arcs), 0, n - 1)
    assert val == pytest.approx(ref)
    assert all(-1e-12 <= f <= c + 1e-12 for (_, _, c), f in zip(arcs, flow))
    bal = _conservation(n, arcs, flow, 0, n - 1)
    assert np.allclose(bal[1:-1], 0)
    assert bal[-1] == pytest.approx(val)


@given(dags(with_cost=True), st.integers(1, 4))
def test_min_cost_flow_matches_networkx(g, amount):
    n, arcs = g
    res = min_cost_flow(n, arcs, 0, n - 1, amount)
    G = _nx(n, arcs)
    if nx.maximum_flow_value(G, 0, n - 1) < amount:
        assert res is None
        return
    G.nodes[0]["demand"] = -amount
    G.nodes[n - 1]["demand"] = amount
    ref = nx.min_cost_flow_cost(G)
    cost, flow = res
    assert cost == pytest.approx(ref)
    assert sum(a[3] * f for a, f in zip(arcs, flow)) == pytest.approx(ref)


@given(dags())
def test_strip_paths_covers_flow(g):
    n, arcs = g
    val, flow = max_flow(n, arcs, 0, n - 1)
    flow = np.rint(flow).astype(int)
    paths = strip_paths(n, arcs, flow, 0, n - 1)
    assert len(paths) == round(val)
    used = np.zeros(len(arcs), dtype=int)
    for p in paths:
        assert arcs[p[0]][0] == 0 and arcs[p[-1]][1] == n - 1
        for a, b in zip(p, p[1:]):
            assert arcs[a][1] == arcs[b][0]
        used[p] += 1
    assert np.array_equal(used, flow)
