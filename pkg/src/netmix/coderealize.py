"""Turn a feasible (design, flows) pair into a scalar linear code over GF(q).

Fractional rates are handled by coding over ``n`` time slots: each flow p
becomes ``floor(n * R_p)`` unit-rate sub-sources and each (edge, slot) is split
into unit sub-edges.  Coefficients are then drawn at random on every junction
the mixing design permits, and decodability is checked by rank at each
terminal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExpansionFailed, FieldTooSmall, Infeasible, RealizationFailed
from .flowopt import FlowSolution, junction_lp
from .gf import GF, is_prime
from .graphs import max_flow, strip_paths
from .mixing import MixingDesign, canonical_beta
from .netmodel import NetworkInstance

__all__ = [
    "ExpandedNetwork",
    "RealizedCode",
    "TerminalReport",
    "time_expand",
    "assign_coefficients",
    "verify_decodability",
    "check_code",
    "realize_and_verify",
    "code_to_dict",
    "dumps_code",
]

_CEIL_TOL = 1e-7


def _iceil(v: float) -> int:
    return max(0, math.ceil(v - _CEIL_TOL))


@dataclass
class ExpandedNetwork:
    inst: NetworkInstance = field(repr=False)
    n: int
    sub_sources: tuple  # per flow: floor(n R_p)
    counts: np.ndarray  # (E, L) sub-edges per edge slot
    paths: dict  # (terminal, flow) -> list of [(edge, slot), ...]
    assignment: dict  # (terminal, edge, slot, sub-edge) -> (flow, sub-source)

    @property
    def L(self) -> int:
        return self.counts.shape[1]

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sub_sources)]).astype(int)

    @property
    def S(self) -> int:
        return int(sum(self.sub_sources))

    @property
    def z_bar(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def sub_edges(self) -> list[tuple[int, int, int]]:
        """All sub-edges ``(edge, slot, j)`` in topological edge order."""
        out = []
        for k in self.inst.topo_edges:
            for l in range(self.L):
                out.extend((k, l, j) for j in range(int(self.counts[k, l])))
        return out

    def flow_of_column(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.sub_sources)), self.sub_sources)


def _route(inst, design, beta, L, caps, need, p, tnode):
    """Unit routing of ``need`` sub-flows of p to node ``tnode`` on the slot line graph.

    Every (edge, slot) is an in/out node pair whose arc carries the integerized
    per-terminal rate in ``caps``; junctions follow the local mixing
    coefficients.  Returns the list of paths as ``[(edge, slot), ...]``.
    """
    n_nodes = 3 + 2 * inst.E * L
    din = lambda k, l: 3 + 2 * (k * L + l)  # noqa: E731
    arcs, split = [(0, 1, need)], {}
    for k, e in enumerate(inst.edges):
        for l in range(L):
            if not (design.x[k][l] >> p) & 1 or caps[k, l] == 0:
                continue
            split[len(arcs)] = (k, l)
            arcs.append((din(k, l), din(k, l) + 1, int(caps[k, l])))
            if inst.source_flow.get(e.tail) == p:
                arcs.append((1, din(k, l), need))
            if e.head == tnode:
                arcs.append((din(k, l) + 1, 2, need))
    for (ki, k, l, m) in beta:
        if (design.x[ki][l] >> p) & 1 and caps[ki, l] and caps[k, m] and (design.x[k][m] >> p) & 1:
            arcs.append((din(ki, l) + 1, din(k, m), need))
    value, flow = max_flow(n_nodes, arcs, 0, 2)
    if value < need - 1e-9:
        return None
    flow = np.rint(flow).astype(int)
    out = []
    for path in strip_paths(n_nodes, arcs, flow, 0, 2):
        out.append([split[a] for a in path if a in split])
    return out[:need]


def time_expand(inst: NetworkInstance, design: MixingDesign, flows: FlowSolution, n: int) -> ExpandedNetwork:
    """Split rates into unit sub-flows over ``n`` time slots and route them."""
    if int(n) != n or n < 1:
        raise ValueError("expansion factor n must be a positive integer")
    n = int(n)
    L = design.L
    f = np.asarray(flows.f, dtype=float)
    if f.shape[:2] != (inst.E, L):
        raise ValueError("flow solution does not match the design")
    beta = design.beta if design.beta is not None else canonical_beta(inst, design.x, L)
    subs = tuple(int(math.floor(n * fl.rate + 1e-9)) for fl in inst.flows)
    integ = np.vectorize(_iceil)(n * f) if f.size else np.zeros(f.shape, int)
    integ = integ.astype(int)
    counts = np.zeros((inst.E, L), dtype=int)
    for ti, t in enumerate(inst.terminals):
        counts = np.maximum(counts, integ[:, :, ti, list(t.demands)].sum(axis=2) if t.demands else 0)
    paths, assignment = {}, {}
    for ti, t in enumerate(inst.terminals):
        used = np.zeros((inst.E, L), dtype=int)
        for p in t.demands:
            if subs[p] == 0:
                paths[(ti, p)] = []
                continue
            got = _route(inst, design, beta, L, integ[:, :, ti, p], subs[p], p, t.node)
            if got is None:
                raise ExpansionFailed(
                    f"cannot route {subs[p]} unit sub-flows of flow {p + 1} to terminal at node {t.node}"
                )
            paths[(ti, p)] = got
            for a, path in enumerate(got):
                for (k, l) in path:
                    j = used[k, l]
                    if j >= counts[k, l]:
                        raise ExpansionFailed(f"edge slot ({k}, {l}) has too few sub-edges")
                    # first fit: one sub-flow per sub-edge and terminal
                    assignment[(ti, k, l, j)] = (p, a)
                    used[k, l] += 1
    return ExpandedNetwork(inst, n, subs, counts, paths, assignment)


@dataclass
class TerminalReport:
    terminal: int
    node: int
    decodable: bool
    rank: int
    required: int
    leaked: tuple  # flows (0-based) visible at the terminal but not demanded


@dataclass
class RealizedCode:
    q: int
    n: int
    sub_edges: list  # (edge, slot, j)
    vectors: np.ndarray  # (n_sub_edges, S) global coding vectors
    alpha: dict  # (from sub-edge index, to sub-edge index) -> coefficient
    source_coeffs: dict = field(default_factory=dict)  # sub-edge index -> coefficients over its flow's sub-sources
    reports: dict = field(default_factory=dict)  # terminal -> TerminalReport
    attempts: int = 0
    rates: dict = field(default_factory=dict)  # edge -> (z_bar / n, z, gap)
    rerouted_cost: float | None = None  # set when the rates had to be rerouted

    @property
    def decodable(self) -> bool:
        return bool(self.reports) and all(r.decodable for r in self.reports.values())


def _check_field(inst, q):
    if not is_prime(q):
        raise ValueError(f"field size {q} is not prime")
    if q <= inst.T:
        raise FieldTooSmall(f"field size {q} must exceed the number of terminals {inst.T}")


def assign_coefficients(
    expanded: ExpandedNetwork, design: MixingDesign, q: int, seed=None, nonzero: bool = True
) -> RealizedCode:
    """Draw local coefficients at random from GF(q) and propagate global vectors.

    ``seed`` may be an int or a numpy Generator (to continue a stream).  By
    default draws are uniform over the nonzero elements; ``nonzero=False``
    draws uniformly over the whole field.
    """
    inst = expanded.inst
    _check_field(inst, q)
    F = GF(q)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    L = design.L
    beta = design.beta if design.beta is not None else canonical_beta(inst, design.x, L)
    into = {}
    for (ki, k, l, m) in beta:
        into.setdefault((k, m), []).append((ki, l))
    subs = expanded.sub_edges()
    by_slot = {}
    for i, (k, l, j) in enumerate(subs):
        by_slot.setdefault((k, l), []).append(i)
    off = expanded.offsets
    V = np.zeros((len(subs), expanded.S), dtype=np.int64)
    alpha, src = {}, {}
    for i, (k, l, j) in enumerate(subs):
        tail = inst.edges[k].tail
        p = inst.source_flow.get(tail)
        if p is not None:
            K = expanded.sub_sources[p]
            if K == 1:
                V[i, off[p]] = 1
            elif K > 1:
                # several sub-sources share one source node: send a random mix
                c = F.random(rng, K, nonzero)
                V[i, off[p] : off[p + 1]] = c
                src[i] = tuple(int(v) for v in c)
            continue
        ins = [u for (ki, li) in sorted(into.get((k, l), ())) for u in by_slot.get((ki, li), ())]
        if not ins:
            continue
        a = F.random(rng, len(ins), nonzero)
        for u, c in zip(ins, a):
            alpha[(u, i)] = int(c)
        V[i] = F.matmul(a[None, :], V[ins])[0]
    return RealizedCode(q, expanded.n, subs, V, alpha, src)


def verify_decodability(code: RealizedCode, expanded: ExpandedNetwork, inst: NetworkInstance | None = None) -> dict:
    """Rank test at every terminal; returns ``{terminal: TerminalReport}``."""
    inst = inst or expanded.inst
    F = GF(code.q)
    col_flow = expanded.flow_of_column()
    rows_at = {}
    for i, (k, l, j) in enumerate(code.sub_edges):
        rows_at.setdefault(inst.edges[k].head, []).append(i)
    out = {}
    for ti, t in enumerate(inst.terminals):
        M = code.vectors[rows_at.get(t.node, [])] % code.q
        want = np.isin(col_flow, t.demands)
        leaked = tuple(sorted({int(col_flow[c]) for c in np.nonzero(~want)[0] if M.shape[0] and M[:, c].any()}))
        req = int(want.sum())
        r = len(F.row_reduce(M[:, want])[1]) if M.shape[0] and req else 0
        out[ti] = TerminalReport(ti, t.node, r == req and not leaked, r, req, leaked)
    code.reports = out
    return out


def check_code(code: RealizedCode, expanded: ExpandedNetwork, design: MixingDesign) -> dict:
    """Post-hoc checks: propagation identity and support containment.

    Returns ``{"propagation": bad rows, "support": bad rows}``.
    """
    inst = expanded.inst
    q = code.q
    n_sub = len(code.sub_edges)
    A = np.zeros((n_sub, n_sub), dtype=np.int64)
    for (u, v), c in code.alpha.items():
        A[v, u] = c
    is_src = np.array([inst.edges[k].tail in inst.source_flow for (k, l, j) in code.sub_edges], dtype=bool)
    recomputed = GF(q).matmul(A, code.vectors) if n_sub else code.vectors
    prop_bad = [i for i in range(n_sub) if not is_src[i] and (recomputed[i] != code.vectors[i] % q).any()]
    col_flow = expanded.flow_of_column()
    supp_bad = []
    for i, (k, l, j) in enumerate(code.sub_edges):
        flows_here = {int(col_flow[c]) for c in np.nonzero(code.vectors[i] % q)[0]}
        if any(not (design.x[k][l] >> p) & 1 for p in flows_here):
            supp_bad.append(i)
    return {"propagation": prop_bad, "support": supp_bad}


def rate_report(expanded: ExpandedNetwork, flows: FlowSolution) -> dict:
    """Per edge: achieved average rate z_bar / n, optimized rate z, and their gap."""
    zb = expanded.z_bar
    n = expanded.n
    return {k: (zb[k] / n, float(flows.z[k]), zb[k] / n - float(flows.z[k])) for k in range(len(zb))}


def realize_and_verify(
    inst: NetworkInstance,
    design: MixingDesign,
    flows: FlowSolution,
    n: int = 1,
    q: int = 101,
    seed=0,
    max_redraws: int = 20,
    nonzero: bool = True,
    reroute: bool = False,
) -> RealizedCode:
    """Expand, draw coefficients until every terminal decodes.

    ``max_redraws`` bounds the total number of coefficient draws; all draws
    come from one seeded stream.  With ``reroute=True`` rates that cross a
    closed junction are replaced by the cheapest junction-consistent rates
    (the returned code then records ``rerouted_cost``).
    """
    _check_field(inst, q)
    rerouted = None
    try:
        ex = time_expand(inst, design, flows, n)
    except ExpansionFailed:
        if not reroute:
            raise
        try:
            flows = junction_lp(inst, design)
        except Infeasible as e:
            raise ExpansionFailed(f"rates cross closed junctions and no consistent rerouting exists: {e}") from e
        rerouted = flows.cost
        ex = time_expand(inst, design, flows, n)
    rng = np.random.default_rng(seed)
    for attempt in range(1, max(1, max_redraws) + 1):
        code = assign_coefficients(ex, design, q, rng, nonzero)
        verify_decodability(code, ex, inst)
        if code.decodable:
            code.attempts = attempt
            code.rates = rate_report(ex, flows)
            code.rerouted_cost = rerouted
            return code
    bad = [f"node {r.node}" for r in code.reports.values() if not r.decodable]
    raise RealizationFailed(f"no decodable code after {max_redraws} draws over GF({q}); failing: {', '.join(bad)}")


def code_to_dict(code: RealizedCode, expanded: ExpandedNetwork) -> dict:
    inst = expanded.inst
    cols = [[int(p) + 1, a + 1] for p, K in enumerate(expanded.sub_sources) for a in range(K)]
    subs = []
    for i, (k, l, j) in enumerate(code.sub_edges):
        e = inst.edges[k]
        subs.append(
            {"edge": f"{e.tail}-{e.head}", "slot": l + 1, "index": j + 1, "vector": [int(v) for v in code.vectors[i]]}
        )
    return {
        "q": code.q,
        "n": code.n,
        "sub_sources": cols,
        "sub_edges": subs,
        "alpha": [[u + 1, v + 1, c] for (u, v), c in sorted(code.alpha.items())],
        "terminals": [
            {"node": r.node, "decodable": r.decodable, "rank": r.rank, "required": r.required}
            for r in code.reports.values()
        ],
        "attempts": code.attempts,
    }


def dumps_code(code: RealizedCode, expanded: ExpandedNetwork) -> str:
    return json.dumps(code_to_dict(code, expanded), indent=1)
