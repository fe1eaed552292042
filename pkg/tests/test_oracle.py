import math

import pytest

from netmix.errors import TooLarge
from netmix.mixing import MixingDesign
from netmix.netmodel import RandomInstanceParams, generate_random_instance
from netmix.oracle import MAX_FREE_BITS, brute_force_optimum, enumerate_designs, free_bits, maximal_designs


def test_fig2_table(fig2):
    res = brute_force_optimum(fig2)
    assert res.counts == {1: 0, 2: 312}
    assert math.isinf(res.table[1])
    assert res.table[2] == pytest.approx(10)
    assert res.cost == pytest.approx(10)


def test_butterfly(butterfly):
    res = brute_force_optimum(butterfly)
    assert res.cost == pytest.approx(7)


def test_pruning_does_not_change_the_optimum():
    for seed in range(15):
        inst = generate_random_instance(RandomInstanceParams(n_nodes=6, n_flows=2, edge_prob=0.55), seed)
        if free_bits(inst, 2) > 16:
            continue
        a = brute_force_optimum(inst, 2)
        b = brute_force_optimum(inst, 2, prune=False)
        assert a.table == pytest.approx(b.table)


def test_too_large():
    big = generate_random_instance(RandomInstanceParams(n_nodes=12, n_flows=3, edge_prob=0.8), 0)
    assert free_bits(big, 2) > MAX_FREE_BITS
    with pytest.raises(TooLarge):
        next(iter(enumerate_designs(big, 2)))


def test_intra_flow_subset(fig2):
    every = {d.x for d in enumerate_designs(fig2, 2)}
    intra = {d.x for d in enumerate_designs(fig2, 2, intra_flow=True)}
    assert intra <= every
    assert all(w & (w - 1) == 0 for x in intra for row in x for w in row)


def test_maximal_designs():
    a = MixingDesign(1, ((1,), (3,)))
    b = MixingDesign(1, ((1,), (1,)))
    c = MixingDesign(1, ((1,), (2,)))
    kept = {d.x for d in maximal_designs([a, b, c])}
    assert kept == {a.x}
