"""Hand-built designs and rates on the reference instances.

Used by the tests, the acceptance suite and the CLI demos.
"""

from __future__ import annotations

import numpy as np

from .flowopt import FlowSolution, total_cost
from .mixing import MixingDesign, propagate_design
from .netmodel import CostFunction, Edge, Flow, NetworkInstance, Terminal

__all__ = ["fig2_design", "fig2_flows", "two_relay_instance", "two_relay_split", "edge_key", "flows_from_paths"]

# (in-edge tail, junction node, out-edge head, in-slot, out-slot), 1-based slots
_FIG2_BETA = [(1, 4, 5, 1, 1), (2, 4, 5, 1, 1), (3, 4, 5, 1, 2), (4, 5, 6, 1, 1), (4, 5, 7, 1, 1), (4, 5, 7, 2, 2)]

# terminal node -> flow (1-based) -> path as [(tail, head, slot)], 1-based slots
_FIG2_PATHS = {
    6: {1: [(1, 6, 1)], 2: [(2, 4, 1), (4, 5, 1), (5, 6, 1)]},
    7: {1: [(1, 4, 1), (4, 5, 1), (5, 7, 1)], 2: [(2, 7, 1)], 3: [(3, 4, 1), (4, 5, 2), (5, 7, 2)]},
}


def edge_key(inst: NetworkInstance, tail: int, head: int) -> int:
    return inst.edge_index[(tail, head)]


def fig2_design(inst: NetworkInstance) -> MixingDesign:
    """The two-slot design that separates flow 3 from flows 1, 2 on edge (4,5)."""
    beta = [
        (edge_key(inst, a, b), edge_key(inst, b, c), l - 1, m - 1) for a, b, c, l, m in _FIG2_BETA
    ]
    return propagate_design(inst, beta, 2)


def flows_from_paths(inst: NetworkInstance, L: int, paths: dict, rate_of=None) -> FlowSolution:
    """Rates from explicit unit paths: ``{terminal node: {flow: [(tail, head, slot)]}}`` (1-based)."""
    E, T, P = inst.E, inst.T, inst.P
    f = np.zeros((E, L, T, P))
    for ti, t in enumerate(inst.terminals):
        for p1, path in paths.get(t.node, {}).items():
            r = inst.flows[p1 - 1].rate if rate_of is None else rate_of(p1 - 1)
            for a, b, l in path:
                f[edge_key(inst, a, b), l - 1, ti, p1 - 1] += r
    z_l = f.sum(axis=3).max(axis=2)
    z = z_l.sum(axis=1)
    return FlowSolution(z, z_l, f, total_cost(inst, z))


def fig2_flows(inst: NetworkInstance) -> FlowSolution:
    """Unit rates along the coloured paths of the reference design (total cost 10)."""
    return flows_from_paths(inst, 2, _FIG2_PATHS)


def two_relay_instance(rate: float = 1) -> NetworkInstance:
    """Two sources, each feeding two relays; both relays feed one terminal wanting both flows."""
    pairs = [(1, 3), (1, 4), (2, 3), (2, 4), (3, 5), (4, 5)]
    return NetworkInstance(
        nodes=(1, 2, 3, 4, 5),
        edges=tuple(Edge(i, j, 1 if i > 2 else 2, CostFunction("linear", 1)) for i, j in pairs),
        flows=(Flow(1, rate), Flow(2, rate)),
        terminals=(Terminal(5, (0, 1)),),
    )


def two_relay_split(inst: NetworkInstance) -> tuple[MixingDesign, FlowSolution]:
    """Both relays mix both flows and each flow splits evenly across the relays.

    At n = 2 every relay output is a random combination of both sources, so
    decoding succeeds with a probability that grows with the field size.
    """
    beta = [(edge_key(inst, a, b), edge_key(inst, b, 5), 0, 0) for a, b in [(1, 3), (2, 3), (1, 4), (2, 4)]]
    design = propagate_design(inst, beta, 1)
    f = np.zeros((inst.E, 1, 1, 2))
    for a, b, p in [(1, 3, 0), (1, 4, 0), (2, 3, 1), (2, 4, 1), (3, 5, 0), (3, 5, 1), (4, 5, 0), (4, 5, 1)]:
        f[edge_key(inst, a, b), 0, 0, p] = 0.5 * inst.flows[p].rate
    z_l = f.sum(axis=3).max(axis=2)
    z = z_l.sum(axis=1)
    return design, FlowSolution(z, z_l, f, total_cost(inst, z))
