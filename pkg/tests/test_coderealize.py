import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from sympy.polys.domains import GF as SGF
from sympy.polys.matrices import DomainMatrix

from netmix.coderealize import (
    assign_coefficients,
    check_code,
    dumps_code,
    realize_and_verify,
    time_expand,
    verify_decodability,
)
from netmix.errors import ExpansionFailed, FieldTooSmall, RealizationFailed
from netmix.fixtures import fig2_design, fig2_flows, two_relay_instance, two_relay_split
from netmix.netmodel import fig2_instance
from netmix.oracle import brute_force_optimum
from suites import random_suite, split_design


def _rank(M, q):
    if M.size == 0:
        return 0
    return DomainMatrix([[SGF(q)(int(v)) for v in row] for row in M.tolist()], M.shape, SGF(q)).rank()


def test_reference_code(fig2):
    d, f = fig2_design(fig2), fig2_flows(fig2)
    code = realize_and_verify(fig2, d, f, n=1, q=101, seed=0)
    assert code.decodable and code.attempts >= 1
    ex = time_expand(fig2, d, f, 1)
    assert check_code(code, ex, d) == {"propagation": [], "support": []}
    data = json.loads(dumps_code(code, ex))
    assert data["q"] == 101 and all(t["decodable"] for t in data["terminals"])


def test_expansion_counts(fig2):
    ex = time_expand(fig2, fig2_design(fig2), fig2_flows(fig2), 3)
    assert ex.sub_sources == (3, 3, 3)
    np.testing.assert_array_equal(ex.z_bar, 3 * np.array(fig2_flows(fig2).z))


def test_field_checks(fig2):
    d, f = fig2_design(fig2), fig2_flows(fig2)
    with pytest.raises(FieldTooSmall):
        realize_and_verify(fig2, d, f, q=2)
    with pytest.raises(ValueError):
        realize_and_verify(fig2, d, f, q=9)
    with pytest.raises(ValueError):
        time_expand(fig2, d, f, 0)


def test_closed_junction_rates(fig2):
    """Rates that enter a slot no local coefficient connects cannot be expanded."""
    from netmix.flowopt import oracle_lp

    d = split_design(fig2)
    f = oracle_lp(fig2, d)
    with pytest.raises(ExpansionFailed):
        time_expand(fig2, d, f, 1)
    with pytest.raises(ExpansionFailed):
        realize_and_verify(fig2, d, f, reroute=True)


def test_realization_failure_names_nodes():
    inst = two_relay_instance()
    d, f = two_relay_split(inst)
    with pytest.raises(RealizationFailed, match="node 5"):
        realize_and_verify(inst, d, f, n=2, q=3, seed=1, max_redraws=1)


def test_success_rate_grows_with_field_size():
    inst = two_relay_instance()
    d, f = two_relay_split(inst)
    ex = time_expand(inst, d, f, 2)
    rates = []
    for q in (3, 7, 101):
        ok = 0
        for s in range(300):
            code = assign_coefficients(ex, d, q, s)
            verify_decodability(code, ex)
            ok += code.decodable
        rates.append(ok / 300)
    assert rates[0] < rates[1] < rates[2]
    assert rates[2] >= 0.9


def test_uniform_draws_option(fig2):
    d, f = fig2_design(fig2), fig2_flows(fig2)
    ex = time_expand(fig2, d, f, 1)
    seen_zero = False
    for s in range(50):
        code = assign_coefficients(ex, d, 3, s, nonzero=False)
        seen_zero |= 0 in code.alpha.values()
        assert check_code(code, ex, d)["propagation"] == []
    assert seen_zero


@given(st.integers(0, 10_000))
def test_decodability_matches_independent_rank(seed):
    inst = two_relay_instance()
    d, f = two_relay_split(inst)
    ex = time_expand(inst, d, f, 2)
    code = assign_coefficients(ex, d, 5, seed)
    reps = verify_decodability(code, ex)
    rows = [i for i, (k, l, j) in enumerate(code.sub_edges) if inst.edges[k].head == 5]
    r = _rank(code.vectors[rows], 5)
    assert reps[0].rank == r
    assert reps[0].decodable == (r == ex.S)


@given(st.sampled_from(range(60)), st.integers(1, 3), st.integers(0, 1000))
def test_suite_codes_respect_supports(idx, n, seed):
    name, inst = random_suite()[idx]
    res = brute_force_optimum(inst)
    if not res.feasible:
        return
    try:
        ex = time_expand(inst, res.design, res.flows, n)
    except ExpansionFailed:
        return
    assert np.all(ex.z_bar >= n * np.asarray(res.flows.z) - 1e-6)
    code = assign_coefficients(ex, res.design, 101, seed)
    assert check_code(code, ex, res.design) == {"propagation": [], "support": []}
    for rep in verify_decodability(code, ex).values():
        assert not rep.leaked
