"""Deterministic instance suites shared by the property and acceptance tests."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from netmix.netmodel import (
    CostFunction,
    Edge,
    NetworkInstance,
    RandomInstanceParams,
    fig2_instance,
    generate_random_instance,
    l_max,
)
from netmix.mixing import MixingDesign, canonical_beta
from netmix.oracle import free_bits

CONFIGS = (
    RandomInstanceParams(n_nodes=6, n_flows=3, n_terminals=2, edge_prob=0.45, capacity_range=(1.0, 2.5)),
    RandomInstanceParams(n_nodes=7, n_flows=3, n_terminals=2, edge_prob=0.35, capacity_range=(1.0, 2.5)),
    RandomInstanceParams(n_nodes=6, n_flows=2, n_terminals=2, edge_prob=0.5, capacity_range=(2.0, 4.0)),
    RandomInstanceParams(n_nodes=7, n_flows=3, n_terminals=3, edge_prob=0.35, capacity_range=(2.0, 4.0)),
)
MAX_BITS = 20


def fig2_variant(seed: int) -> NetworkInstance:
    """The fig2 topology with random capacities and linear costs; mixing gains show up here."""
    base = fig2_instance()
    rng = np.random.default_rng(seed)
    edges = tuple(
        Edge(e.tail, e.head, round(float(rng.uniform(1.0, 3.0)), 3), CostFunction("linear", round(float(rng.uniform(1, 3)), 3)))
        for e in base.edges
    )
    return NetworkInstance(base.nodes, edges, base.flows, base.terminals)


@lru_cache(maxsize=None)
def random_suite(size: int = 50, variants: int = 10) -> tuple:
    """``(name, instance)`` pairs small enough for exhaustive enumeration at every L <= L_max."""
    out = [(f"fig2-var{s}", fig2_variant(s)) for s in range(variants)]
    seed = 0
    while len(out) < size + variants:
        cfg = CONFIGS[seed % len(CONFIGS)]
        inst = generate_random_instance(cfg, seed)
        if free_bits(inst, l_max(inst)) <= MAX_BITS:
            out.append((f"rand{seed}", inst))
        seed += 1
    return tuple(out)


# found by the CFL search on fig2: flows may use slot 2 of (4,5) to reach terminal 6,
# but only slot 1 of (4,5) feeds slot 2 of (5,6)
_SPLIT_X = ((1, 1), (1, 1), (2, 2), (2, 2), (4, 4), (2, 7), (0, 2), (7, 0))


def split_design(inst):
    return MixingDesign(2, _SPLIT_X, canonical_beta(inst, _SPLIT_X, 2))
