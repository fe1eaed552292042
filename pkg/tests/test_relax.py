import numpy as np
import pytest
from hypothesis import given, strategies as st

from netmix.errors import Infeasible, RoundingInfeasible, Unsupported
from netmix.fixtures import fig2_design, fig2_flows
from netmix.flowopt import check_flow_feasible, oracle_lp
from netmix.mixing import check_feasible_mixing
from netmix.netmodel import CostFunction, Edge, NetworkInstance, RandomInstanceParams, generate_random_instance
from netmix.oracle import brute_force_optimum
from netmix.relax import (
    PenalizedModel,
    RelaxParams,
    embed_discrete,
    mccormick_lower_bound,
    relaxed_residuals,
    round_design,
    solve_relaxed,
)


def fd_gradient(prob, v, mu, h=1e-6):
    g = np.zeros_like(v)
    for i in range(len(v)):
        e = np.zeros_like(v)
        e[i] = h
        g[i] = (prob.penalty_value(v + e, mu) - prob.penalty_value(v - e, mu)) / (2 * h)
    return g


def test_embed_and_round_reference(fig2):
    d, f = fig2_design(fig2), fig2_flows(fig2)
    rel = embed_discrete(fig2, d, f)
    res = relaxed_residuals(fig2, rel)
    assert max(res.values()) == 0
    assert rel.residual == 0
    assert round_design(fig2, rel).x == d.x


def test_rounding_catches_leaks(fig2):
    d, f = fig2_design(fig2), fig2_flows(fig2)
    rel = embed_discrete(fig2, d, f)
    rel.xbar[fig2.edge_index[(5, 6)], 1, 2] = 0.2  # flow 3 towards a terminal that refuses it
    with pytest.raises(RoundingInfeasible):
        round_design(fig2, rel)


def test_infeasible_at_one_slot(fig2):
    with pytest.raises(Infeasible):
        solve_relaxed(fig2, 1, RelaxParams(starts=2))


def test_butterfly_relaxed(butterfly):
    rel = solve_relaxed(butterfly, 1, RelaxParams(starts=2))
    assert rel.cost == pytest.approx(7, rel=1e-6)
    d = round_design(butterfly, rel)
    assert check_feasible_mixing(butterfly, d) == []
    assert max(check_flow_feasible(butterfly, d, rel.flows).values()) <= 1e-6


def test_mccormick(fig2, butterfly):
    assert mccormick_lower_bound(fig2, 2) <= 10 + 1e-9
    assert mccormick_lower_bound(butterfly, 1) == pytest.approx(7)


def test_mccormick_needs_linear_costs(fig2):
    edges = tuple(Edge(e.tail, e.head, e.capacity, CostFunction("quadratic", 1, 1)) for e in fig2.edges)
    inst = NetworkInstance(fig2.nodes, edges, fig2.flows, fig2.terminals)
    with pytest.raises(Unsupported):
        mccormick_lower_bound(inst, 2)


@given(st.integers(0, 10**6), st.sampled_from([1.0, 10.0, 1000.0]))
def test_gradient_matches_finite_differences(seed, mu):
    from netmix.netmodel import fig2_instance

    edges = tuple(
        Edge(e.tail, e.head, e.capacity, CostFunction("quadratic", 1.0, 0.3)) for e in fig2_instance().edges
    )
    base = fig2_instance()
    prob = PenalizedModel(NetworkInstance(base.nodes, edges, base.flows, base.terminals), 2)
    v = prob.random_point(np.random.default_rng(seed))
    _, g = prob.value_grad(v, mu)
    fd = fd_gradient(prob, v, mu)
    assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(g), 1e-12)


@given(st.integers(0, 500))
def test_bound_sandwich_on_random_instances(seed):
    inst = generate_random_instance(RandomInstanceParams(n_nodes=6, n_flows=2, edge_prob=0.55), seed)
    res = brute_force_optimum(inst, 1)
    lb = mccormick_lower_bound(inst, 1)
    if res.feasible:
        assert lb <= res.cost * (1 + 1e-7)
        rel = embed_discrete(inst, res.design, res.flows)
        assert rel.residual == 0
        assert round_design(inst, rel).x == res.design.x
        assert oracle_lp(inst, round_design(inst, rel)).cost == pytest.approx(res.cost)
