"""Exhaustive reference solver for desk-scale instances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

from .errors import Infeasible, TooLarge
from .flowopt import FlowSolution, flow_precheck, oracle_lp
from .mixing import MixingDesign, canonical_beta
from .netmodel import NetworkInstance, l_max

__all__ = ["MAX_FREE_BITS", "free_bits", "enumerate_designs", "maximal_designs", "OracleResult", "brute_force_optimum"]

MAX_FREE_BITS = 24


def free_bits(inst: NetworkInstance, L: int) -> int:
    return len(inst.free_edges) * L * inst.P


def _closure(inputs) -> list[int]:
    """Every OR of a subset of ``inputs`` (the empty subset gives 0)."""
    reach = {0}
    for w in inputs:
        reach |= {r | w for r in reach}
    return sorted(reach)


def enumerate_designs(
    inst: NetworkInstance, L: int, limit: int | None = None, intra_flow: bool = False
) -> Iterator[MixingDesign]:
    """Yield every feasible mixing design at parameter ``L``.

    Depth-first over (edge, slot) in topological edge order.  Each free vector
    ranges over the OR-closure of the vectors entering its tail, minus those
    carrying a flow the head terminal does not want; delivery to terminals is
    checked once all vectors are fixed.
    """
    nbits = free_bits(inst, L)
    if nbits > MAX_FREE_BITS:
        raise TooLarge(f"{nbits} free mixing bits exceed the cap of {MAX_FREE_BITS}")
    x = [[0] * L for _ in inst.edges]
    for k, e in enumerate(inst.edges):
        if e.tail in inst.source_flow:
            x[k] = [1 << inst.source_flow[e.tail]] * L
    slots = [(k, l) for k in inst.free_edges for l in range(L)]
    excl = {}
    for k in inst.free_edges:
        ti = inst.terminal_at.get(inst.edges[k].head)
        excl[k] = 0 if ti is None else ~inst.demand_masks[ti]
    count = 0

    def leaf_ok():
        for ti, t in enumerate(inst.terminals):
            recv = 0
            for k in inst.in_edges[t.node]:
                for w in x[k]:
                    recv |= w
            if recv & inst.demand_masks[ti] != inst.demand_masks[ti]:
                return False
            if recv & ~inst.demand_masks[ti]:
                return False
        return True

    def rec(i):
        nonlocal count
        if limit is not None and count >= limit:
            return
        if i == len(slots):
            if leaf_ok():
                count += 1
                xt = tuple(tuple(r) for r in x)
                yield MixingDesign(L, xt, canonical_beta(inst, xt, L))
            return
        k, l = slots[i]
        tail = inst.edges[k].tail
        inputs = {x[ki][m] for ki in inst.in_edges[tail] for m in range(L)}
        for w in _closure(sorted(inputs)):
            if w & excl[k]:
                continue
            if intra_flow and w & (w - 1):
                continue
            x[k][l] = w
            yield from rec(i + 1)
            if limit is not None and count >= limit:
                break
        x[k][l] = 0

    yield from rec(0)


def maximal_designs(designs) -> list[MixingDesign]:
    """Designs whose vectors are not all contained in another design's vectors."""
    ds = sorted(designs, key=lambda d: -sum(bin(w).count("1") for row in d.x for w in row))
    keep: list[MixingDesign] = []
    for d in ds:
        dominated = False
        for o in keep:
            if all(a & ~b == 0 for ra, rb in zip(d.x, o.x) for a, b in zip(ra, rb)):
                dominated = True
                break
        if not dominated:
            keep.append(d)
    return keep


@dataclass
class OracleResult:
    L: int
    feasible_count: int
    cost: float
    design: MixingDesign | None
    flows: FlowSolution | None
    table: dict = field(default_factory=dict)  # L -> optimal cost (inf when infeasible)
    counts: dict = field(default_factory=dict)  # L -> number of feasible designs

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.cost)


def _best_at(inst, L, intra_flow=False, prune=True):
    designs = list(enumerate_designs(inst, L, intra_flow=intra_flow))
    # the flow optimum can only drop when a mask grows, so maximal designs suffice
    cands = maximal_designs(designs) if prune else designs
    best = (math.inf, None, None)
    for d in cands:
        if flow_precheck(inst, d):
            continue
        try:
            sol = oracle_lp(inst, d)
        except Infeasible:
            continue
        if sol.cost < best[0] - 1e-12:
            best = (sol.cost, d, sol)
    return len(designs), best


def brute_force_optimum(
    inst: NetworkInstance, L: int | None = None, intra_flow: bool = False, prune: bool = True
) -> OracleResult:
    """Exact optimum at ``L`` (default L_max) plus the cost table for 1..L."""
    if L is None:
        L = l_max(inst)
    for l in range(1, L + 1):
        n = free_bits(inst, l)
        if n > MAX_FREE_BITS:
            raise TooLarge(f"{n} free mixing bits exceed the cap of {MAX_FREE_BITS}")
    table, counts = {}, {}
    best = None
    for l in range(1, L + 1):
        n, b = _best_at(inst, l, intra_flow, prune)
        table[l], counts[l] = b[0], n
        best = b
    return OracleResult(L, counts[L], best[0], best[1], best[2], table, counts)
