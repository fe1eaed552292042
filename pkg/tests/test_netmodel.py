import itertools
import json

import pytest
from hypothesis import given, strategies as st

from netmix.errors import GenerationFailed
from netmix.netmodel import (
    CostFunction,
    Edge,
    Flow,
    NetworkInstance,
    RandomInstanceParams,
    Terminal,
    atom_partition,
    discrete_variable_count,
    dumps_instance,
    fig2_instance,
    format_atoms,
    generate_random_instance,
    l_max,
    loads_instance,
    validate_instance,
)


def test_fig2_atoms(fig2):
    assert format_atoms(atom_partition(fig2)) == "{{1,2},{3}}"
    assert l_max(fig2) == 2
    assert validate_instance(fig2) == []


def test_butterfly_single_atom(butterfly):
    assert l_max(butterfly) == 1
    assert validate_instance(butterfly) == []


def test_variable_count(fig2):
    # in-degrees at edge tails: (1,6),(1,4),(2,7),(2,4),(3,4) have 0; (4,5) has 3; (5,6),(5,7) have 1 each
    assert discrete_variable_count(fig2, 1) == 5
    assert discrete_variable_count(fig2, 2) == 20


def _inst(**kw):
    base = dict(
        nodes=(1, 2, 3),
        edges=(Edge(1, 2, 1), Edge(2, 3, 1)),
        flows=(Flow(1, 1.0),),
        terminals=(Terminal(3, (0,)),),
    )
    base.update(kw)
    return NetworkInstance(**base)


@pytest.mark.parametrize(
    "kw, needle",
    [
        (dict(edges=(Edge(1, 2, 1), Edge(2, 3, 1), Edge(3, 2, 1))), "cycle"),
        (dict(edges=(Edge(1, 2, -1), Edge(2, 3, 1))), "negative capacity"),
        (dict(edges=(Edge(1, 2, 1), Edge(2, 3, 1), Edge(1, 2, 1))), "duplicate edge"),
        (dict(flows=(Flow(1, 0.0),)), "non-positive rate"),
        (dict(terminals=(Terminal(3, (1,)),)), "unknown flow"),
        (dict(edges=(Edge(1, 2, 1), Edge(2, 3, 1), Edge(2, 1, 1))), "source has incoming edge"),
        (dict(nodes=(1, 2, 3, 4), edges=(Edge(1, 2, 1), Edge(2, 3, 1), Edge(3, 4, 1))), "terminal has outgoing"),
        (dict(nodes=(1, 2, 3, 4), flows=(Flow(1, 1.0), Flow(4, 1.0))), "undemanded flow 2"),
        (dict(edges=(Edge(1, 2, 1, CostFunction("linear", -1)), Edge(2, 3, 1))), "negative cost"),
    ],
)
def test_validation_messages(kw, needle):
    msgs = validate_instance(_inst(**kw))
    assert any(needle in m for m in msgs), msgs


def test_cost_function_rejects_quadratic_term_on_linear():
    with pytest.raises(ValueError):
        CostFunction("linear", 1, 2)


@st.composite
def demand_patterns(draw):
    P = draw(st.integers(1, 6))
    T = draw(st.integers(1, 4))
    sets = [draw(st.sets(st.integers(0, P - 1), min_size=1)) for _ in range(T)]
    return P, sets


@given(demand_patterns())
def test_atoms_are_the_coarsest_refining_partition(pat):
    P, sets = pat
    inst = NetworkInstance(
        nodes=tuple(range(P + len(sets))),
        edges=(),
        flows=tuple(Flow(p, 1.0) for p in range(P)),
        terminals=tuple(Terminal(P + i, tuple(s)) for i, s in enumerate(sets)),
    )
    atoms = atom_partition(inst)
    # independent oracle: the non-empty cells of all intersections of sets and complements
    cells = set()
    for signs in itertools.product([True, False], repeat=len(sets)):
        cell = set(range(P))
        for s, keep in zip(sets, signs):
            cell &= s if keep else set(range(P)) - s
        if cell:
            cells.add(frozenset(cell))
    assert set(atoms) == cells
    assert sorted(p for a in atoms for p in a) == list(range(P))
    for s in sets:
        assert all(a <= s or not (a & s) for a in atoms)


@given(st.integers(0, 10_000), st.sampled_from(["linear", "quadratic"]))
def test_generator_valid_and_deterministic(seed, kind):
    params = RandomInstanceParams(cost_kind=kind)
    a = generate_random_instance(params, seed)
    assert validate_instance(a) == []
    assert a == generate_random_instance(params, seed)
    assert loads_instance(dumps_instance(a)) == a


def test_generator_rejects_impossible_sizes():
    with pytest.raises(GenerationFailed):
        generate_random_instance(RandomInstanceParams(n_nodes=3, n_flows=2, n_terminals=2), 0)


def test_json_is_one_based(fig2):
    d = json.loads(dumps_instance(fig2))
    assert [t["demands"] for t in d["terminals"]] == [[1, 2], [1, 2, 3]]
