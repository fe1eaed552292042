"""Minimum-cost flow rates for a fixed mixing design.

``solve_flow`` runs a dual decomposition: the per-terminal coupling between
slot rates and flow rates is priced out, which splits the problem into one
min-cost flow per (terminal, flow) pair and a closed-form problem per edge.
``oracle_lp`` solves the same problem as one linear program and serves as the
reference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, NoConvergence, Unsupported
from .graphs import max_flow, min_cost_flow
from .mixing import MixingDesign, canonical_beta
from .netmodel import CostFunction, Edge, NetworkInstance
from .simplex import solve_lp

__all__ = [
    "FlowSolution",
    "as_mask",
    "edge_subproblem",
    "solve_flow",
    "oracle_lp",
    "multicast_lp",
    "check_flow_feasible",
    "flow_precheck",
    "flow_feasible",
    "junction_lp",
    "solution_to_dict",
    "dumps_solution",
    "solution_from_dict",
    "loads_solution",
    "total_cost",
]


@dataclass
class FlowSolution:
    z: np.ndarray  # (E,)
    z_l: np.ndarray  # (E, L)
    f: np.ndarray  # (E, L, T, P), zero where p is not demanded by t
    cost: float
    lower_bound: float | None = None
    iterations: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def gap(self) -> float | None:
        if self.lower_bound is None:
            return None
        if self.cost == 0:
            return 0.0 if self.lower_bound <= 0 else np.inf
        return max(0.0, (self.cost - self.lower_bound) / abs(self.cost))


def as_mask(inst: NetworkInstance, design, L: int | None = None) -> np.ndarray:
    """Design (or an (E, L, P) array with entries in [0, 1]) as a float mask."""
    if isinstance(design, MixingDesign):
        return design.mask(inst.P)
    m = np.asarray(design, dtype=float)
    if m.ndim != 3 or m.shape[0] != inst.E or m.shape[2] != inst.P:
        raise ValueError(f"mask shape {m.shape} does not match instance")
    if L is not None and m.shape[1] != L:
        raise ValueError("mask slot count differs from L")
    return m


def total_cost(inst: NetworkInstance, z) -> float:
    return float(sum(e.cost(float(v)) for e, v in zip(inst.edges, z)))


# --------------------------------------------------------------------------
# Edge-local problem under conservation prices


def edge_subproblem(edge: Edge, prices, mask) -> tuple[float, np.ndarray, np.ndarray]:
    """Minimize ``U(z) - sum(prices * f)`` over one edge's local constraints.

    ``prices[l, t, p]`` is the reward per unit of flow ``p`` toward terminal
    ``t`` carried in slot ``l`` (the head-minus-tail potential difference of a
    conservation-priced Lagrangian), and ``mask[l, t, p]`` is 1 where the flow
    may use the slot and ``t`` demands ``p``.  Per slot and terminal the best
    single flow takes the whole slot rate, so each slot earns
    ``sum_t max_p price``; all rate goes to the best slot (lowest index on
    ties).  Returns ``(z, z_l, f)``.
    """
    prices = np.asarray(prices, dtype=float)
    mask = np.asarray(mask, dtype=float)
    L, T, P = prices.shape
    eff = np.where(mask > 0, prices, -np.inf)
    best_p = np.argmax(eff, axis=2)  # (L, T); first index on ties
    best_v = np.take_along_axis(eff, best_p[..., None], axis=2)[..., 0]
    gain = np.where(best_v > 0, best_v, 0.0).sum(axis=1)  # (L,)
    z_l = np.zeros(L)
    f = np.zeros((L, T, P))
    if L == 0 or gain.max() <= 0:
        return 0.0, z_l, f
    l = int(np.argmax(gain))
    w = float(gain[l])
    z = _edge_rate(edge.cost, w, edge.capacity)
    if z <= 0:
        return 0.0, z_l, f
    z_l[l] = z
    for t in range(T):
        if best_v[l, t] > 0:
            f[l, t, best_p[l, t]] = z
    return z, z_l, f


def _edge_rate(cost: CostFunction, w: float, cap: float) -> float:
    """argmin over 0 <= z <= cap of U(z) - w z, smallest on ties."""
    if cost.kind == "quadratic" and cost.b > 0:
        return float(min(max((w - cost.a) / (2 * cost.b), 0.0), cap))
    return float(cap) if w > cost.a else 0.0


def _edge_value(cost: CostFunction, w: float, cap: float) -> tuple[float, float]:
    z = _edge_rate(cost, w, cap)
    return z, cost(z) - w * z


# --------------------------------------------------------------------------
# Commodity graphs


class _Commodities:
    """Slot-expanded arc lists, one per (terminal, demanded flow) pair."""

    def __init__(self, inst: NetworkInstance, mask: np.ndarray):
        self.inst = inst
        self.mask = mask
        E, L, P = mask.shape
        self.L = L
        self.node_ix = {v: i for i, v in enumerate(inst.topo_order)}
        self.n = len(self.node_ix)
        self.pairs = inst.commodities
        self.arcs = []  # per commodity: list of (u, v, cap, e, l)
        for ti, p in self.pairs:
            arcs = []
            for k in inst.topo_edges:
                e = inst.edges[k]
                for l in range(L):
                    c = mask[k, l, p] * e.capacity
                    if c > 0:
                        arcs.append((self.node_ix[e.tail], self.node_ix[e.head], c, k, l))
            self.arcs.append(arcs)

    def endpoints(self, c):
        ti, p = self.pairs[c]
        return self.node_ix[self.inst.flows[p].source], self.node_ix[self.inst.terminals[ti].node]

    def max_flows(self) -> list[float]:
        out = []
        for c, arcs in enumerate(self.arcs):
            s, t = self.endpoints(c)
            v, _ = max_flow(self.n, [(u, w, cap) for u, w, cap, _, _ in arcs], s, t)
            out.append(v)
        return out

    def route(self, c, prices) -> tuple[float, np.ndarray] | None:
        """Min-cost routing of the flow rate for commodity ``c``; ``prices[e, l]``."""
        arcs = self.arcs[c]
        s, t = self.endpoints(c)
        rate = self.inst.flows[self.pairs[c][1]].rate
        w = [prices[k, l] for _, _, _, k, l in arcs]
        fast = _dag_route(self.n, arcs, w, s, t, rate)
        if fast is not None:
            return fast
        res = min_cost_flow(self.n, [(u, v, cap, wi) for (u, v, cap, _, _), wi in zip(arcs, w)], s, t, rate)
        return res


def _dag_route(n, arcs, w, s, t, rate):
    """Single shortest path on the (topologically ordered) arc list, if it fits."""
    dist = [np.inf] * n
    prev = [-1] * n
    dist[s] = 0.0
    for a, (u, v, cap, _, _) in enumerate(arcs):
        du = dist[u]
        if du < np.inf and du + w[a] < dist[v] - 1e-15:
            dist[v] = du + w[a]
            prev[v] = a
    if dist[t] == np.inf:
        return None
    flow = np.zeros(len(arcs))
    v = t
    while v != s:
        a = prev[v]
        if arcs[a][2] < rate - 1e-12:
            return None
        flow[a] = rate
        v = arcs[a][0]
    return dist[t] * rate, flow


def flow_precheck(inst: NetworkInstance, design, L: int | None = None) -> list[tuple[int, int, float]]:
    """Commodities whose demanded rate exceeds their masked max-flow.

    Returns ``(terminal, flow, maxflow)`` triples; empty means the necessary
    condition holds.
    """
    mask = as_mask(inst, design, L)
    com = _Commodities(inst, mask)
    bad = []
    for c, v in enumerate(com.max_flows()):
        ti, p = com.pairs[c]
        if v < inst.flows[p].rate - 1e-9:
            bad.append((ti, p, v))
    return bad


# --------------------------------------------------------------------------
# Dual decomposition


def _recover_z(inst, F):
    """Slot and edge rates implied by per-terminal flows (coding takes the max)."""
    S = F.sum(axis=3)  # (E, L, T)
    z_l = S.max(axis=2) if S.shape[2] else np.zeros(S.shape[:2])
    return z_l, z_l.sum(axis=1)


def solve_flow(
    inst: NetworkInstance,
    design,
    L: int | None = None,
    eps_opt: float = 1e-3,
    eps_feas: float = 1e-6,
    max_iter: int = 100000,
    step: str = "polyak",
    step_scale: float = 1.0,
    keep_history: bool = False,
    certify_after: int | None = 200,
) -> FlowSolution:
    """Dual decomposition with subgradient steps on the slot-coupling prices.

    Every primal candidate is conservation-exact (it is a convex combination of
    per-commodity min-cost flows), so feasibility only hinges on capacities.
    Stops once the relative gap between the best primal cost and the best dual
    bound is at most ``eps_opt``.

    ``step="polyak"`` aims each step at the best primal cost found so far;
    ``step="diminishing"`` moves ``step_scale / k`` (in units of the largest
    linear cost coefficient) along the normalized subgradient, which is also
    what Polyak falls back to until a feasible primal point exists.

    Capacity-coupled infeasibility is invisible to the per-commodity max-flow
    precheck; if no feasible primal point has shown up after
    ``certify_after`` iterations, a feasibility LP decides the question.
    """
    mask = as_mask(inst, design, L)
    E, L, P = mask.shape
    T = inst.T
    bad = flow_precheck(inst, mask)
    if bad:
        ti, p, v = bad[0]
        raise Infeasible(
            f"flow {p + 1} to terminal {inst.terminals[ti].node}: max-flow {v:.6g} < rate {inst.flows[p].rate:.6g}"
        )
    com = _Commodities(inst, mask)
    C = len(com.pairs)
    caps = np.array([e.capacity for e in inst.edges])
    if C == 0:
        z = np.zeros(E)
        return FlowSolution(z, np.zeros((E, L)), np.zeros((E, L, T, P)), total_cost(inst, z), total_cost(inst, z))

    # start prices at the linear cost split evenly over terminals
    a = np.array([e.cost.a for e in inst.edges])
    mu = np.repeat(np.repeat((a / T)[:, None, None], L, axis=1), T, axis=2)
    price_scale = max(1.0, float(a.max()))

    best_ub, best_lb = np.inf, -np.inf
    best = None
    F_avg = np.zeros((E, L, T, P))
    wsum = 0.0
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        F = np.zeros((E, L, T, P))
        q = 0.0
        for c in range(C):
            ti, p = com.pairs[c]
            val, fl = com.route(c, mu[:, :, ti])
            q += val
            for (_, _, _, k, l), x in zip(com.arcs[c], fl):
                if x:
                    F[k, l, ti, p] += x
        W = mu.sum(axis=2)
        Z = np.zeros((E, L))
        for k, e in enumerate(inst.edges):
            l = int(np.argmax(W[k]))
            z, val = _edge_value(e.cost, float(W[k, l]), e.capacity)
            Z[k, l] = z
            q += val
        best_lb = max(best_lb, q)

        # primal candidates: the current iterate and the tail average
        cands = [F] if wsum == 0 else [F, F_avg / wsum]
        for cand in cands:
            z_l, z = _recover_z(inst, cand)
            if np.all(z <= caps + eps_feas):
                ub = total_cost(inst, z)
                if ub < best_ub:
                    best_ub = ub
                    best = (z, z_l, cand.copy())

        g = F.sum(axis=3) - Z[:, :, None]
        gn = float((g * g).sum())
        if keep_history:
            history.append((it, q, best_lb, best_ub))
        if best_ub < np.inf and (best_ub - best_lb <= eps_opt * abs(best_ub) or gn == 0):
            break
        if best is None and it == certify_after and not flow_feasible(inst, mask):
            raise Infeasible("no flow meets all capacities under this design (feasibility LP)")
        if step == "diminishing" or best_ub == np.inf:
            s = step_scale * price_scale / it / np.sqrt(gn)
        else:
            s = step_scale * max(best_ub - q, 1e-12) / gn
        if (it & (it - 1)) == 0:
            # restart the average at powers of two so early iterates fade out
            F_avg[:] = 0.0
            wsum = 0.0
        F_avg += s * F
        wsum += s
        mu = np.maximum(mu + s * g, 0.0)

    if best is None:
        if flow_feasible(inst, mask):
            raise NoConvergence(f"no capacity-feasible primal point after {it} iterations", {"lower_bound": best_lb})
        raise Infeasible("no flow meets all capacities under this design (feasibility LP)")
    z, z_l, F = best
    return FlowSolution(z, z_l, F, best_ub, best_lb, it, history)


# --------------------------------------------------------------------------
# LP oracle


def _flow_lp(inst: NetworkInstance, mask: np.ndarray, exact: bool):
    E, L, P = mask.shape
    zvars = E * L
    fvars = []  # (k, l, ti, p)
    for ti, p in inst.commodities:
        for k in range(E):
            for l in range(L):
                if mask[k, l, p] > 0:
                    fvars.append((k, l, ti, p))
    n = zvars + len(fvars)
    fidx = {key: zvars + i for i, key in enumerate(fvars)}
    c = np.zeros(n)
    for k, e in enumerate(inst.edges):
        c[k * L : (k + 1) * L] = e.cost.a
    A_ub, b_ub = [], []
    # per-terminal slot coupling
    groups: dict = {}
    for (k, l, ti, p), j in fidx.items():
        groups.setdefault((k, l, ti), []).append(j)
    for (k, l, ti), js in groups.items():
        row = np.zeros(n)
        row[js] = 1
        row[k * L + l] = -1
        A_ub.append(row)
        b_ub.append(0.0)
    for k, e in enumerate(inst.edges):
        row = np.zeros(n)
        row[k * L : (k + 1) * L] = 1
        A_ub.append(row)
        b_ub.append(e.capacity)
    for (k, l, ti, p), j in fidx.items():
        if mask[k, l, p] < 1:
            row = np.zeros(n)
            row[j] = 1
            A_ub.append(row)
            b_ub.append(mask[k, l, p] * inst.edges[k].capacity)
    A_eq, b_eq = [], []
    for ti, p in inst.commodities:
        s, t = inst.flows[p].source, inst.terminals[ti].node
        for v in inst.nodes:
            row = np.zeros(n)
            for k in inst.out_edges[v]:
                for l in range(L):
                    if (k, l, ti, p) in fidx:
                        row[fidx[(k, l, ti, p)]] += 1
            for k in inst.in_edges[v]:
                for l in range(L):
                    if (k, l, ti, p) in fidx:
                        row[fidx[(k, l, ti, p)]] -= 1
            rhs = inst.flows[p].rate if v == s else (-inst.flows[p].rate if v == t else 0.0)
            if not row.any() and rhs == 0:
                continue
            A_eq.append(row)
            b_eq.append(rhs)
    return c, A_ub, b_ub, A_eq, b_eq, fidx


def flow_feasible(inst: NetworkInstance, design, L: int | None = None) -> bool:
    """Whether any flow meets demands and capacities under the mask (phase-1 LP)."""
    mask = as_mask(inst, design, L)
    if flow_precheck(inst, mask):
        return False
    c, A_ub, b_ub, A_eq, b_eq, _ = _flow_lp(inst, mask, False)
    return solve_lp(np.zeros_like(c), A_ub, b_ub, A_eq, b_eq).status == "optimal"


def oracle_lp(inst: NetworkInstance, design, L: int | None = None, exact: bool = False) -> FlowSolution:
    """Exact optimum of the flow problem as one LP (linear costs only).

    With ``exact=True`` the simplex runs in rational arithmetic and the cost is
    returned as a ``Fraction``-valued float together with the exact value in
    ``lower_bound``.
    """
    if not inst.all_linear:
        raise Unsupported("oracle_lp needs linear costs")
    mask = as_mask(inst, design, L)
    E, L, P = mask.shape
    c, A_ub, b_ub, A_eq, b_eq, fidx = _flow_lp(inst, mask, exact)
    res = solve_lp(c, A_ub or None, b_ub or None, A_eq or None, b_eq or None, exact=exact)
    if res.status != "optimal":
        raise Infeasible(f"flow LP is {res.status}")
    x = np.array([float(v) for v in res.x])
    z_l = x[: E * L].reshape(E, L)
    F = np.zeros((E, L, inst.T, P))
    for (k, l, ti, p), j in fidx.items():
        F[k, l, ti, p] = x[j]
    # tighten slot rates to what the flows need
    z_l = np.minimum(z_l, F.sum(axis=3).max(axis=2)) if inst.T else z_l
    z = z_l.sum(axis=1)
    cost = total_cost(inst, z)
    sol = FlowSolution(z, z_l, F, cost, cost)
    if exact:
        sol.exact_cost = res.objective
    return sol


def junction_lp(inst: NetworkInstance, design: MixingDesign) -> FlowSolution:
    """Cheapest flows that only cross junctions the local coefficients open.

    The plain flow problem couples flows to slots through the masks alone, so
    a flow may enter a node in one slot and leave in a slot that slot cannot
    feed.  Such rates admit no code with the design's supports.  Here every
    commodity is routed on the slot line graph (an arc for each active
    coefficient), which is what time expansion needs.  Linear costs only.
    """
    if not inst.all_linear:
        raise Unsupported("junction_lp needs linear costs")

    L = design.L
    E = inst.E
    beta = design.beta if design.beta is not None else canonical_beta(inst, design.x, L)
    on = lambda k, l, p: (design.x[k][l] >> p) & 1  # noqa: E731
    zvars = E * L
    gidx, hidx = {}, {}
    n = zvars
    for ti, p in inst.commodities:
        for k in range(E):
            for l in range(L):
                if on(k, l, p):
                    gidx[(ti, p, k, l)] = n
                    n += 1
        for (ki, k, l, m) in sorted(beta):
            if on(ki, l, p) and on(k, m, p):
                hidx[(ti, p, ki, k, l, m)] = n
                n += 1
    c = np.zeros(n)
    for k, e in enumerate(inst.edges):
        c[k * L : (k + 1) * L] = e.cost.a
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    groups: dict = {}
    for (ti, p, k, l), j in gidx.items():
        groups.setdefault((ti, k, l), []).append(j)
    for (ti, k, l), js in groups.items():
        row = np.zeros(n)
        row[js] = 1
        row[k * L + l] = -1
        A_ub.append(row)
        b_ub.append(0.0)
    for k, e in enumerate(inst.edges):
        row = np.zeros(n)
        row[k * L : (k + 1) * L] = 1
        A_ub.append(row)
        b_ub.append(e.capacity)
    for ti, p in inst.commodities:
        src, dst = inst.flows[p].source, inst.terminals[ti].node
        row = np.zeros(n)
        for k in inst.out_edges[src]:
            for l in range(L):
                if (ti, p, k, l) in gidx:
                    row[gidx[(ti, p, k, l)]] = 1
        A_eq.append(row)
        b_eq.append(inst.flows[p].rate)
        for k, e in enumerate(inst.edges):
            for l in range(L):
                j = gidx.get((ti, p, k, l))
                if j is None:
                    continue
                if e.tail != src:
                    # what enters an edge slot arrives through open junctions
                    row = np.zeros(n)
                    row[j] = -1
                    for key, h in hidx.items():
                        if key[:2] == (ti, p) and key[3] == k and key[5] == l:
                            row[h] = 1
                    A_eq.append(row)
                    b_eq.append(0.0)
                if e.head != dst:
                    row = np.zeros(n)
                    row[j] = -1
                    for key, h in hidx.items():
                        if key[:2] == (ti, p) and key[2] == k and key[4] == l:
                            row[h] = 1
                    A_eq.append(row)
                    b_eq.append(0.0)
    res = solve_lp(c, A_ub, b_ub, A_eq or None, b_eq or None)
    if res.status != "optimal":
        raise Infeasible(f"no junction-consistent flow under this design ({res.status})")
    x = res.x
    F = np.zeros((E, L, inst.T, inst.P))
    for (ti, p, k, l), j in gidx.items():
        F[k, l, ti, p] = x[j]
    z_l = np.minimum(x[:zvars].reshape(E, L), F.sum(axis=3).max(axis=2)) if inst.T else x[:zvars].reshape(E, L)
    z = z_l.sum(axis=1)
    cost = total_cost(inst, z)
    return FlowSolution(z, z_l, F, cost, cost)


def multicast_lp(inst: NetworkInstance) -> float:
    """Classical min-cost multicast LP with network coding (linear costs).

    Variables are one rate per edge and one flow per (terminal, flow, edge);
    every terminal's flows share the edge rate only through ``f <= z`` on the
    sum over flows.  Only meaningful when every terminal demands every flow.
    """
    if not inst.all_linear:
        raise Unsupported("multicast LP needs linear costs")
    E, P = inst.E, inst.P
    pairs = [(ti, p) for ti in range(inst.T) for p in range(P)]
    n = E + len(pairs) * E
    c = np.zeros(n)
    c[:E] = [e.cost.a for e in inst.edges]
    fi = lambda c_, k: E + c_ * E + k  # noqa: E731
    A_ub, b_ub = [], []
    for ti in range(inst.T):
        for k in range(E):
            row = np.zeros(n)
            row[k] = -1
            for c_, (tj, p) in enumerate(pairs):
                if tj == ti:
                    row[fi(c_, k)] = 1
            A_ub.append(row)
            b_ub.append(0.0)
    for k, e in enumerate(inst.edges):
        row = np.zeros(n)
        row[k] = 1
        A_ub.append(row)
        b_ub.append(e.capacity)
    A_eq, b_eq = [], []
    for c_, (ti, p) in enumerate(pairs):
        s, t = inst.flows[p].source, inst.terminals[ti].node
        for v in inst.nodes:
            row = np.zeros(n)
            for k in inst.out_edges[v]:
                row[fi(c_, k)] += 1
            for k in inst.in_edges[v]:
                row[fi(c_, k)] -= 1
            rhs = inst.flows[p].rate if v == s else (-inst.flows[p].rate if v == t else 0.0)
            A_eq.append(row)
            b_eq.append(rhs)
    res = solve_lp(c, A_ub, b_ub, A_eq, b_eq)
    if res.status != "optimal":
        raise Infeasible(f"multicast LP is {res.status}")
    return float(res.objective)


# --------------------------------------------------------------------------
# Residuals


def check_flow_feasible(inst: NetworkInstance, design, sol: FlowSolution, L: int | None = None) -> dict:
    """Largest violation per constraint family (0 means satisfied)."""
    mask = as_mask(inst, design, L)
    E, L, P = mask.shape
    caps = np.array([e.capacity for e in inst.edges])
    z, z_l, F = np.asarray(sol.z, float), np.asarray(sol.z_l, float), np.asarray(sol.f, float)
    out = {}
    out["capacity"] = float(max(0.0, np.max(-z, initial=0), np.max(z - caps, initial=0)))
    out["nonnegativity"] = float(max(0.0, np.max(-F, initial=0), np.max(-z_l, initial=0)))
    S = F.sum(axis=3)
    out["slot_rate"] = float(max(0.0, np.max(S - z_l[:, :, None], initial=0)))
    out["edge_rate"] = float(max(0.0, np.max(z_l.sum(axis=1) - z, initial=0)))
    out["mask"] = float(max(0.0, np.max(F - mask[:, :, None, :] * caps[:, None, None, None], initial=0)))
    undemanded = 0.0
    for ti in range(inst.T):
        for p in range(P):
            if p not in inst.terminals[ti].demands:
                undemanded = max(undemanded, float(np.max(np.abs(F[:, :, ti, p]), initial=0)))
    out["undemanded"] = undemanded
    cons = 0.0
    for ti, p in inst.commodities:
        s, t = inst.flows[p].source, inst.terminals[ti].node
        for v in inst.nodes:
            bal = sum(F[k, :, ti, p].sum() for k in inst.out_edges[v]) - sum(
                F[k, :, ti, p].sum() for k in inst.in_edges[v]
            )
            sigma = inst.flows[p].rate if v == s else (-inst.flows[p].rate if v == t else 0.0)
            cons = max(cons, abs(bal - sigma))
    out["conservation"] = float(cons)
    return out


# --------------------------------------------------------------------------
# Serialization


def solution_to_dict(inst: NetworkInstance, sol: FlowSolution) -> dict:
    E, L = sol.z_l.shape
    edges = []
    for k, e in enumerate(inst.edges):
        flows = []
        for l in range(L):
            for ti, t in enumerate(inst.terminals):
                for p in t.demands:
                    v = float(sol.f[k, l, ti, p])
                    if v > 0:
                        flows.append({"slot": l + 1, "terminal": t.node, "flow": p + 1, "rate": v})
        edges.append(
            {
                "tail": e.tail,
                "head": e.head,
                "z": float(sol.z[k]),
                "z_l": [float(v) for v in sol.z_l[k]],
                "f": flows,
            }
        )
    d = {"L": L, "cost": float(sol.cost), "edges": edges}
    if sol.lower_bound is not None:
        d["lower_bound"] = float(sol.lower_bound)
    return d


def dumps_solution(inst: NetworkInstance, sol: FlowSolution) -> str:
    return json.dumps(solution_to_dict(inst, sol), indent=2) + "\n"


def solution_from_dict(inst: NetworkInstance, d: dict) -> FlowSolution:
    L = int(d["L"])
    E, T, P = inst.E, inst.T, inst.P
    z, z_l, f = np.zeros(E), np.zeros((E, L)), np.zeros((E, L, T, P))
    term = {t.node: ti for ti, t in enumerate(inst.terminals)}
    for ed in d["edges"]:
        k = inst.edge_index[(ed["tail"], ed["head"])]
        z[k] = ed["z"]
        z_l[k] = ed["z_l"]
        for r in ed["f"]:
            f[k, r["slot"] - 1, term[r["terminal"]], r["flow"] - 1] = r["rate"]
    return FlowSolution(z, z_l, f, float(d["cost"]), d.get("lower_bound"))


def loads_solution(inst: NetworkInstance, text: str) -> FlowSolution:
    return solution_from_dict(inst, json.loads(text))
