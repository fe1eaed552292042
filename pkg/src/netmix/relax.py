"""Continuous mixing: penalty search, exact repair, ceiling rounding and a lower bound.

In the continuous model every mixing bit becomes a number in [0, 1] and the
OR relation turns into the bilinear pair

    xbar[out, m, p] >= betabar[in, out, l, m] * xbar[in, l, p]
    xbar[out, m, p] <= sum over (in, l) of betabar[in, out, l, m] * xbar[in, l, p]

A point satisfying both with zero residual rounds up to a discrete design that
is feasible together with the same flow rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, NoConvergence, RoundingInfeasible, TooLarge, Unsupported
from .flowopt import FlowSolution, check_flow_feasible, oracle_lp, solve_flow, total_cost
from .mixing import MixingDesign, check_feasible_mixing
from .netmodel import NetworkInstance
from .simplex import solve_lp

__all__ = [
    "RelaxParams",
    "RelaxedSolution",
    "PenalizedModel",
    "solve_relaxed",
    "round_design",
    "embed_discrete",
    "relaxed_residuals",
    "repair",
    "mccormick_lower_bound",
]

MAX_PATHS = 20000


@dataclass
class RelaxParams:
    starts: int = 8
    penalty_rounds: int = 8
    mu0: float = 1.0
    mu_factor: float = 10.0
    inner_iter: int = 400
    grad_tol: float = 1e-8
    eps_pen: float = 1e-9
    snaps: tuple = (1e-9, 1e-7, 1e-5, 1e-3)
    stall_rounds: int = 2  # give up a start after this many rounds without halving a residual above 1e-4
    seed: int = 0
    check_oracle: bool = True


@dataclass
class RelaxedSolution:
    L: int
    xbar: np.ndarray  # (E, L, P)
    pairs: tuple  # (in_edge, out_edge) for every adjacent edge pair
    betabar: np.ndarray  # (n_pairs, L, L) indexed [pair, in_slot, out_slot]
    flows: FlowSolution
    residual: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def cost(self) -> float:
        return self.flows.cost


def edge_pairs(inst: NetworkInstance) -> tuple:
    return tuple((ki, k) for k in range(inst.E) for ki in inst.in_edges[inst.edges[k].tail])


def fixed_entries(inst: NetworkInstance, L: int):
    """(fixed mask, fixed values) for xbar: source edges carry their own flow,
    terminal edges never carry unwanted flows, edges leaving an input-less
    relay carry nothing."""
    E, P = inst.E, inst.P
    fixed = np.zeros((E, L, P), dtype=bool)
    val = np.zeros((E, L, P))
    for k, e in enumerate(inst.edges):
        if e.tail in inst.source_flow:
            fixed[k] = True
            val[k, :, inst.source_flow[e.tail]] = 1.0
        elif not inst.in_edges[e.tail]:
            fixed[k] = True
        ti = inst.terminal_at.get(e.head)
        if ti is not None:
            for p in range(P):
                if p not in inst.terminals[ti].demands:
                    fixed[k, :, p] = True
                    val[k, :, p] = 0.0
    return fixed, val


# --------------------------------------------------------------------------
# Residuals


def relaxed_residuals(inst: NetworkInstance, rel: RelaxedSolution) -> dict:
    """Largest violation of every continuous-model constraint family."""
    L = rel.L
    X, Bt = rel.xbar, rel.betabar
    fixed, val = fixed_entries(inst, L)
    out = {}
    out["box"] = float(max(0.0, np.max(-X, initial=0), np.max(X - 1, initial=0), np.max(-Bt, initial=0), np.max(Bt - 1, initial=0)))
    src = np.zeros_like(fixed)
    for k, e in enumerate(inst.edges):
        if e.tail in inst.source_flow:
            src[k] = True
    out["source"] = float(np.max(np.abs(X - val)[src], initial=0))
    excl = fixed & ~src
    out["terminal"] = float(np.max(np.abs(X)[excl], initial=0))
    out.update(check_flow_feasible(inst, X, rel.flows, L))
    g19, g20 = _bilinear(inst, X, Bt, rel.pairs, L)
    out["lower_or"] = float(max(0.0, np.max(g19, initial=0)))
    out["upper_or"] = float(max(0.0, np.max(g20, initial=0)))
    return out


def _bilinear(inst, X, Bt, pairs, L):
    g19 = []
    for r, (ki, k) in enumerate(pairs):
        # [l, m, p]: beta(l, m) * x_in(l, p) - x_out(m, p)
        g19.append(Bt[r][:, :, None] * X[ki][:, None, :] - X[k][None, :, :])
    g20 = []
    by_out: dict = {}
    for r, (ki, k) in enumerate(pairs):
        by_out.setdefault(k, []).append(r)
    for k, rs in by_out.items():
        s = sum(np.einsum("lm,lp->mp", Bt[r], X[pairs[r][0]]) for r in rs)
        g20.append(X[k] - s)
    a = np.concatenate([g.ravel() for g in g19]) if g19 else np.zeros(0)
    b = np.concatenate([g.ravel() for g in g20]) if g20 else np.zeros(0)
    return a, b


# --------------------------------------------------------------------------
# Penalized problem


def _paths(inst: NetworkInstance, L: int, allowed: np.ndarray, ti: int, p: int) -> list[list[tuple[int, int]]]:
    """All slot-labelled source-to-terminal paths usable by flow ``p``."""
    s, t = inst.flows[p].source, inst.terminals[ti].node
    out = []

    def rec(v, acc):
        if len(out) > MAX_PATHS:
            raise TooLarge("too many slot-labelled paths for the continuous solver")
        if v == t:
            out.append(list(acc))
            return
        for k in inst.out_edges[v]:
            for l in range(L):
                if allowed[k, l, p]:
                    acc.append((k, l))
                    rec(inst.edges[k].head, acc)
                    acc.pop()

    rec(s, [])
    return out


class PenalizedModel:
    """Penalized continuous model in a flat vector.

    Blocks: free xbar entries, betabar, path weights (one simplex per
    terminal/flow pair, so conservation is exact), and slot rates (one capped
    simplex per edge).  Penalties cover the bilinear pair, the slot coupling
    and the flow masking; everything else is kept by projection.
    """

    def __init__(self, inst: NetworkInstance, L: int):
        self.inst, self.L = inst, L
        E, P, T = inst.E, inst.P, inst.T
        self.fixed, self.fixed_val = fixed_entries(inst, L)
        self.free_idx = np.flatnonzero(~self.fixed.ravel())
        self.pairs = edge_pairs(inst)
        allowed = ~self.fixed | (self.fixed_val > 0)
        self.paths = []  # per commodity: list of paths
        for ti, p in inst.commodities:
            self.paths.append(_paths(inst, L, allowed, ti, p))
        self.rates = np.array([inst.flows[p].rate for _, p in inst.commodities])
        self.n_x = len(self.free_idx)
        self.n_b = len(self.pairs) * L * L
        self.path_off = np.cumsum([0] + [len(ps) for ps in self.paths])
        self.n_w = int(self.path_off[-1])
        self.n_z = E * L
        self.n = self.n_x + self.n_b + self.n_w + self.n_z
        self.caps = np.array([e.capacity for e in inst.edges])
        self.a = np.array([e.cost.a for e in inst.edges])
        self.b = np.array([e.cost.b for e in inst.edges])

        # path incidence: entry -> (flat f index, path index)
        fi, pi = [], []
        for c, (ti, p) in enumerate(inst.commodities):
            for j, path in enumerate(self.paths[c]):
                for k, l in path:
                    fi.append(((k * L + l) * T + ti) * P + p)
                    pi.append(self.path_off[c] + j)
        self.inc_f = np.array(fi, dtype=np.int64)
        self.inc_p = np.array(pi, dtype=np.int64)
        self.f_size = E * L * T * P
        demanded = np.zeros((E, L, T, P), dtype=bool)
        for ti, p in inst.commodities:
            demanded[:, :, ti, p] = True
        self.demanded = demanded

        # bilinear index arrays
        r_in, r_out = [], []
        for ki, k in self.pairs:
            r_in.append(ki)
            r_out.append(k)
        self.r_in = np.array(r_in, dtype=np.int64)
        self.r_out = np.array(r_out, dtype=np.int64)
        self.outs = sorted(set(r_out))
        self.proj_w = _GroupProjection(np.diff(self.path_off), self.rates, capped=False)
        self.proj_z = _GroupProjection(np.full(E, L), self.caps, capped=True)

    # -- packing ------------------------------------------------------------

    def split(self, v):
        i = 0
        xf = v[i : i + self.n_x]
        i += self.n_x
        bt = v[i : i + self.n_b].reshape(len(self.pairs), self.L, self.L)
        i += self.n_b
        w = v[i : i + self.n_w]
        i += self.n_w
        zl = v[i : i + self.n_z].reshape(self.inst.E, self.L)
        return xf, bt, w, zl

    def full_x(self, xf):
        X = self.fixed_val.copy().ravel()
        X[self.free_idx] = xf
        return X.reshape(self.fixed.shape)

    def flows(self, w):
        f = np.bincount(self.inc_f, weights=w[self.inc_p], minlength=self.f_size)
        E, L, P = self.fixed.shape
        return f.reshape(E, L, self.inst.T, P)

    def project(self, v):
        v = v.copy()
        xf, bt, w, zl = self.split(v)
        np.clip(xf, 0, 1, out=xf)
        np.clip(bt, 0, 1, out=bt)
        w[:] = self.proj_w(w)
        zl[:] = self.proj_z(zl.ravel()).reshape(zl.shape)
        return v

    def random_point(self, rng):
        v = np.empty(self.n)
        xf, bt, w, zl = self.split(v)
        xf[:] = rng.uniform(0, 1, self.n_x)
        bt[:] = rng.uniform(0, 1, bt.shape)
        for c in range(len(self.paths)):
            lo, hi = self.path_off[c], self.path_off[c + 1]
            w[lo:hi] = rng.dirichlet(np.ones(hi - lo)) * self.rates[c] if hi > lo else 0
        zl[:] = rng.uniform(0, 1, zl.shape) * (self.caps[:, None] / self.L)
        return self.project(v)

    # -- objective ----------------------------------------------------------

    def cost(self, v):
        zl = self.split(v)[3]
        z = zl.sum(axis=1)
        return float((self.a * z + self.b * z * z).sum())

    def constraint_values(self, v):
        """(slot coupling, masking, lower OR, upper OR) residual arrays."""
        xf, bt, w, zl = self.split(v)
        X = self.full_x(xf)
        F = self.flows(w)
        g5 = F.sum(axis=3) - zl[:, :, None]
        g18 = np.where(self.demanded, F - (X * self.caps[:, None, None])[:, :, None, :], -1.0)
        g19, g20 = _bilinear(self.inst, X, bt, self.pairs, self.L)
        return g5, g18, g19, g20

    def residual(self, v) -> float:
        """Largest violation of the bilinear pair."""
        _, _, g19, g20 = self.constraint_values(v)
        return float(max(0.0, np.max(g19, initial=0), np.max(g20, initial=0)))

    def penalty_value(self, v, mu):
        return self.value_grad(v, mu, need_grad=False)

    def value_grad(self, v, mu, need_grad=True):
        inst, L = self.inst, self.L
        E, P, T = inst.E, inst.P, inst.T
        xf, bt, w, zl = self.split(v)
        X = self.full_x(xf)
        F = self.flows(w)
        z = zl.sum(axis=1)
        val = float((self.a * z + self.b * z * z).sum())

        h5 = np.maximum(F.sum(axis=3) - zl[:, :, None], 0.0)  # (E, L, T)
        h18 = np.where(self.demanded, np.maximum(F - (X * self.caps[:, None, None])[:, :, None, :], 0.0), 0.0)
        # lower OR: beta[r, l, m] * X[in, l, p] - X[out, m, p]
        Xi = X[self.r_in]  # (R, L, P)
        Xo = X[self.r_out]
        prod = bt[:, :, :, None] * Xi[:, :, None, :]  # (R, l, m, P)
        h19 = np.maximum(prod - Xo[:, None, :, :], 0.0)
        # upper OR: X[out, m, p] - sum_{r into out, l} beta * X_in
        S = np.zeros((E, L, P))
        np.add.at(S, self.r_out, prod.sum(axis=1))
        has_in = np.zeros(E, dtype=bool)
        has_in[self.r_out] = True
        h20 = np.where(has_in[:, None, None], np.maximum(X - S, 0.0), 0.0)

        val += mu * float((h5 ** 2).sum() + (h18 ** 2).sum() + (h19 ** 2).sum() + (h20 ** 2).sum())
        if not need_grad:
            return val

        gX = np.zeros((E, L, P))
        gbt = np.zeros_like(bt)
        gF = np.zeros((E, L, T, P))
        gzl = np.zeros((E, L))
        gzl += (self.a + 2 * self.b * z)[:, None]
        # slot coupling
        gF += 2 * mu * h5[:, :, :, None]
        gzl -= 2 * mu * h5.sum(axis=2)
        # masking
        gF += 2 * mu * h18
        gX -= 2 * mu * (h18.sum(axis=2)) * self.caps[:, None, None]
        # lower OR
        t19 = 2 * mu * h19  # (R, l, m, P)
        gbt += (t19 * Xi[:, :, None, :]).sum(axis=3)
        np.add.at(gX, self.r_in, (t19 * bt[:, :, :, None]).sum(axis=2))
        np.add.at(gX, self.r_out, -t19.sum(axis=1))
        # upper OR
        t20 = 2 * mu * h20  # (E, m, P)
        gX += t20
        tr = t20[self.r_out]  # (R, m, P)
        gbt -= np.einsum("rmp,rlp->rlm", tr, Xi)
        np.add.at(gX, self.r_in, -np.einsum("rmp,rlm->rlp", tr, bt))

        gw = np.bincount(self.inc_p, weights=gF.ravel()[self.inc_f], minlength=self.n_w)
        grad = np.concatenate([gX.ravel()[self.free_idx], gbt.ravel(), gw, gzl.ravel()])
        return val, grad

    def to_solution(self, v, flows: FlowSolution | None = None) -> RelaxedSolution:
        xf, bt, w, zl = self.split(v)
        X = self.full_x(xf)
        if flows is None:
            F = self.flows(w)
            z = zl.sum(axis=1)
            flows = FlowSolution(z, zl.copy(), F, total_cost(self.inst, z))
        return RelaxedSolution(self.L, X, self.pairs, bt.copy(), flows, self.residual(v))


class _GroupProjection:
    """Euclidean projection of consecutive blocks onto scaled simplices.

    Block ``g`` (of length ``sizes[g]``) goes onto ``{w >= 0, sum w = totals[g]}``,
    or onto ``{w >= 0, sum w <= totals[g]}`` when ``capped``.
    """

    def __init__(self, sizes, totals, capped):
        sizes = np.asarray(sizes, dtype=np.int64)
        self.G, self.K = len(sizes), int(sizes.max()) if len(sizes) else 0
        self.rows = np.repeat(np.arange(self.G), sizes)
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]) if len(sizes) else np.zeros(0, np.int64)
        self.cols = np.arange(int(sizes.sum())) - np.repeat(starts, sizes)
        self.tot = np.asarray(totals, dtype=float)[:, None]
        self.capped = capped
        self.k = np.arange(1, self.K + 1)

    def __call__(self, y):
        if self.G == 0 or len(y) == 0:
            return y.copy()
        M = np.full((self.G, self.K), -np.inf)
        M[self.rows, self.cols] = y
        u = -np.sort(-M, axis=1)
        fin = np.isfinite(u)
        cs = np.cumsum(np.where(fin, u, 0.0), axis=1)
        cond = fin & (u - (cs - self.tot) / self.k > 0)
        rho = np.maximum(cond.sum(axis=1) - 1, 0)
        theta = (cs[np.arange(self.G), rho] - self.tot[:, 0]) / (rho + 1)
        if self.capped:
            theta = np.maximum(theta, 0.0)
        return np.maximum(y - theta[self.rows], 0.0)


def _pg(prob: PenalizedModel, v, mu, max_iter, tol):
    """Projected gradient with Barzilai-Borwein steps and Armijo backtracking."""
    val, g = prob.value_grad(v, mu)
    alpha = 1.0 / max(1.0, float(np.abs(g).max()))
    for it in range(max_iter):
        d = prob.project(v - g) - v
        if float(np.abs(d).max()) <= tol:
            break
        t = alpha
        while True:
            vn = prob.project(v - t * g)
            valn = prob.penalty_value(vn, mu)
            if valn <= val + 1e-4 * float(g @ (vn - v)) or t < 1e-14:
                break
            t *= 0.5
        if valn > val:
            break
        vn_val, gn = prob.value_grad(vn, mu)
        s, y = vn - v, gn - g
        sy = float(s @ y)
        alpha = float(s @ s) / sy if sy > 1e-300 else 2 * t
        alpha = min(max(alpha, 1e-12), 1e6)
        v, val, g = vn, vn_val, gn
    return v


# --------------------------------------------------------------------------
# Repair and polish


def repair(inst: NetworkInstance, X, Bt, pairs, L, snap: float = 1e-9):
    """Make the bilinear pair hold exactly by moving xbar (and cutting betabar).

    Values below ``snap`` are zeroed first.  Then, in topological edge order,
    any coefficient that would feed an unwanted flow into a terminal edge is
    cut, and each free entry is clipped into the interval the two OR
    inequalities allow given the (already repaired) inputs.
    """
    fixed, val = fixed_entries(inst, L)
    X = np.where(X < snap, 0.0, np.clip(X, 0, 1))
    X[fixed] = val[fixed]
    Bt = np.where(Bt < snap, 0.0, np.clip(Bt, 0, 1))
    by_out: dict = {}
    for r, (ki, k) in enumerate(pairs):
        by_out.setdefault(k, []).append(r)
    for k in inst.topo_edges:
        rs = by_out.get(k)
        if not rs:
            continue
        excl = fixed[k] & (val[k] == 0)  # (L, P): entries that must stay 0
        for r in rs:
            ki = pairs[r][0]
            # beta[r, l, m] > 0 with X[ki, l, p] > 0 for some p excluded at (k, m)
            bad = ((X[ki][:, None, :] > 0) & excl[None, :, :]).any(axis=2)
            Bt[r][bad] = 0.0
        prod = np.stack([Bt[r][:, :, None] * X[pairs[r][0]][:, None, :] for r in rs])  # (R, l, m, P)
        lo = prod.max(axis=(0, 1))
        hi = np.minimum(1.0, prod.sum(axis=(0, 1)))
        Xk = np.clip(X[k], lo, hi)
        X[k] = np.where(fixed[k], val[k], Xk)
    return X, Bt


def _polish(inst, X, L):
    """Exact flows under the continuous mask (f <= xbar * B)."""
    if inst.all_linear:
        return oracle_lp(inst, X, L)
    return solve_flow(inst, X, L)


# --------------------------------------------------------------------------
# Driver


def solve_relaxed(inst: NetworkInstance, L: int, params: RelaxParams | None = None) -> RelaxedSolution:
    """Multi-start penalty search for a low-cost point of the continuous model.

    Each start runs the penalty schedule, then repairs the bilinear pair
    exactly and re-solves the flows under the repaired continuous mask, so a
    returned point has zero bilinear residual.  Among feasible starts the
    cheapest wins.
    """
    params = params or RelaxParams()
    prob = PenalizedModel(inst, L)
    rng = np.random.default_rng(params.seed)
    best = None
    diag = {"starts": [], "residual_history": []}
    for s in range(params.starts):
        v = prob.random_point(rng)
        mu = params.mu0
        hist = [prob.residual(v)]
        accepted = v
        stalled = 0
        for rnd in range(params.penalty_rounds):
            prev = hist[-1]
            v = _pg(prob, accepted, mu, params.inner_iter, params.grad_tol)
            r = prob.residual(v)
            # keep the bilinear residual non-increasing at accepted points
            if r <= hist[-1]:
                accepted = v
                hist.append(r)
            mu *= params.mu_factor
            if hist[-1] <= params.eps_pen:
                break
            stalled = stalled + 1 if rnd > 0 and hist[-1] > max(0.5 * prev, 1e-4) else 0
            if stalled >= params.stall_rounds:
                break
        diag["residual_history"].append(hist)
        xf, bt, _, _ = prob.split(accepted)
        found = None
        # entries at the level of the penalty residual are numerical zeros; try
        # a few cut-off levels and keep the cheapest exactly feasible repair
        for snap in params.snaps:
            X, Bt = repair(inst, prob.full_x(xf), bt, prob.pairs, L, snap)
            try:
                flows = _polish(inst, X, L)
            except Infeasible:
                continue
            if found is None or flows.cost < found[2].cost - 1e-12:
                found = (X, Bt, flows, snap)
        if found is None:
            diag["starts"].append({"start": s, "penalty_residual": hist[-1], "feasible": False})
            continue
        X, Bt, flows, snap = found
        rel = RelaxedSolution(L, X, prob.pairs, Bt, flows, 0.0)
        res = relaxed_residuals(inst, rel)
        rel.residual = max(res["lower_or"], res["upper_or"])
        diag["starts"].append(
            {"start": s, "penalty_residual": hist[-1], "feasible": True, "cost": flows.cost, "snap": snap}
        )
        if rel.residual <= params.eps_pen and (best is None or flows.cost < best.cost - 1e-12):
            best = rel
    if best is not None:
        best.diagnostics = diag
        return best
    if params.check_oracle:
        from .oracle import enumerate_designs

        try:
            empty = next(iter(enumerate_designs(inst, L, limit=1)), None) is None
        except TooLarge:
            empty = False
        if empty:
            raise Infeasible(f"no feasible continuous point at L={L}; discrete enumeration confirms")
    raise NoConvergence("no start reached a feasible point", diag)


def round_design(inst: NetworkInstance, rel: RelaxedSolution, tol: float = 1e-6) -> MixingDesign:
    """Ceiling rounding, checked against the discrete constraints."""
    x = []
    for k in range(inst.E):
        x.append(tuple(sum(1 << p for p in range(inst.P) if rel.xbar[k, l, p] > 0) for l in range(rel.L)))
    beta = frozenset(
        (ki, k, l, m)
        for r, (ki, k) in enumerate(rel.pairs)
        for l in range(rel.L)
        for m in range(rel.L)
        if rel.betabar[r, l, m] > 0 and inst.edges[k].tail not in inst.source_flow
    )
    design = MixingDesign(rel.L, tuple(x), beta)
    viol = check_feasible_mixing(inst, design)
    res = check_flow_feasible(inst, design, rel.flows)
    worst = max(res.values())
    if viol or worst > tol:
        what = f"{len(viol)} mixing violations" if viol else f"flow residual {worst:.3g}"
        raise RoundingInfeasible(f"rounded design fails verification ({what}; relaxed residual {rel.residual:.3g})")
    return design


def embed_discrete(inst: NetworkInstance, design: MixingDesign, flows: FlowSolution) -> RelaxedSolution:
    """A discrete (design, flows) pair viewed as a continuous point."""
    design = design.with_beta(inst)
    pairs = edge_pairs(inst)
    L = design.L
    Bt = np.zeros((len(pairs), L, L))
    index = {pr: r for r, pr in enumerate(pairs)}
    for ki, k, l, m in design.beta:
        Bt[index[(ki, k)], l, m] = 1.0
    rel = RelaxedSolution(L, design.mask(inst.P), pairs, Bt, flows, 0.0)
    res = relaxed_residuals(inst, rel)
    rel.residual = max(res["lower_or"], res["upper_or"])
    return rel


# --------------------------------------------------------------------------
# Lower bound


def mccormick_lower_bound(inst: NetworkInstance, L: int, return_solution: bool = False):
    """LP bound with every bilinear product replaced by its McCormick envelope.

    Variables: free xbar entries and betabar in [0, 1], one product variable
    per (pair, in slot, out slot, flow) with the four envelope inequalities,
    slot rates and arc flows with exact conservation.
    """
    if not inst.all_linear:
        raise Unsupported("the McCormick bound is computed by LP and needs linear costs")
    E, P, T = inst.E, inst.P, inst.T
    fixed, fval = fixed_entries(inst, L)
    pairs = edge_pairs(inst)
    idx: dict = {}

    def var(key):
        if key not in idx:
            idx[key] = len(idx)
        return idx[key]

    for k in range(E):
        for l in range(L):
            var(("z", k, l))
    for k in range(E):
        for l in range(L):
            for p in range(P):
                if not fixed[k, l, p]:
                    var(("x", k, l, p))
    for r in range(len(pairs)):
        for l in range(L):
            for m in range(L):
                var(("b", r, l, m))
                for p in range(P):
                    var(("w", r, l, m, p))
    allowed = ~fixed | (fval > 0)
    for ti, p in inst.commodities:
        for k in range(E):
            for l in range(L):
                if allowed[k, l, p]:
                    var(("f", k, l, ti, p))
    n = len(idx)
    rows, rhs, eq_rows, eq_rhs = [], [], [], []

    def xterm(k, l, p):
        """(variable index or None, constant) for xbar[k, l, p]."""
        if fixed[k, l, p]:
            return None, fval[k, l, p]
        return idx[("x", k, l, p)], 0.0

    def add(coefs, b, eq=False):
        row = np.zeros(n)
        const = 0.0
        for key, c in coefs:
            if isinstance(key, float):
                const += c * key
            else:
                row[key] += c
        (eq_rows if eq else rows).append(row)
        (eq_rhs if eq else rhs).append(b - const)

    def xref(k, l, p):
        j, c = xterm(k, l, p)
        return j if j is not None else float(c)

    # boxes
    for key, j in idx.items():
        if key[0] in ("x", "b"):
            add([(j, 1.0)], 1.0)
    # envelopes and OR inequalities
    by_out: dict = {}
    for r, (ki, k) in enumerate(pairs):
        by_out.setdefault(k, []).append(r)
        for l in range(L):
            for m in range(L):
                b = idx[("b", r, l, m)]
                for p in range(P):
                    w = idx[("w", r, l, m, p)]
                    xi = xref(ki, l, p)
                    add([(w, 1.0), (b, -1.0)], 0.0)  # w <= beta
                    add([(w, 1.0), (xi, -1.0)], 0.0)  # w <= x_in
                    add([(b, 1.0), (xi, 1.0), (w, -1.0)], 1.0)  # w >= beta + x_in - 1
                    add([(w, 1.0), (xref(k, m, p), -1.0)], 0.0)  # lower OR
    for k, rs in by_out.items():
        for m in range(L):
            for p in range(P):
                terms = [(xref(k, m, p), 1.0)]
                for r in rs:
                    for l in range(L):
                        terms.append((idx[("w", r, l, m, p)], -1.0))
                add(terms, 0.0)  # upper OR
    # flows
    for ti, p in inst.commodities:
        for k in range(E):
            for l in range(L):
                if ("f", k, l, ti, p) in idx:
                    add([(idx[("f", k, l, ti, p)], 1.0), (xref(k, l, p), -inst.edges[k].capacity)], 0.0)
    for ti in range(T):
        for k in range(E):
            for l in range(L):
                terms = [(idx[("f", k, l, ti, p)], 1.0) for p in inst.terminals[ti].demands if ("f", k, l, ti, p) in idx]
                if terms:
                    add(terms + [(idx[("z", k, l)], -1.0)], 0.0)
    for k, e in enumerate(inst.edges):
        add([(idx[("z", k, l)], 1.0) for l in range(L)], e.capacity)
    for ti, p in inst.commodities:
        s, t = inst.flows[p].source, inst.terminals[ti].node
        for v in inst.nodes:
            terms = []
            for k in inst.out_edges[v]:
                terms += [(idx[("f", k, l, ti, p)], 1.0) for l in range(L) if ("f", k, l, ti, p) in idx]
            for k in inst.in_edges[v]:
                terms += [(idx[("f", k, l, ti, p)], -1.0) for l in range(L) if ("f", k, l, ti, p) in idx]
            sigma = inst.flows[p].rate if v == s else (-inst.flows[p].rate if v == t else 0.0)
            if terms or sigma:
                add(terms, sigma, eq=True)
    c = np.zeros(n)
    for k, e in enumerate(inst.edges):
        for l in range(L):
            c[idx[("z", k, l)]] = e.cost.a
    res = solve_lp(c, rows, rhs, eq_rows or None, eq_rhs or None)
    if res.status == "infeasible":
        value = np.inf
    else:
        value = float(res.objective)
    if return_solution:
        return value, res, idx
    return value
