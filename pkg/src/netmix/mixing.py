"""Binary mixing designs, their feasibility, and the clause form of the mixing CSP.

A mixing vector is stored as a packed int: bit ``p`` set means flow ``p`` may be
mixed into the stream.  Python ints are unbounded, so the same code path covers
any number of flows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .netmodel import NetworkInstance

__all__ = [
    "pack",
    "unpack",
    "or_combine",
    "achievable_by_or",
    "MixingDesign",
    "Violation",
    "check_feasible_mixing",
    "canonical_beta",
    "propagate_design",
    "Clause",
    "ClauseSystem",
    "build_clauses",
    "design_to_dict",
    "design_from_dict",
    "dumps_design",
    "loads_design",
]


def pack(bits: Sequence[int]) -> int:
    return sum(1 << p for p, b in enumerate(bits) if b)


def unpack(word: int, P: int) -> tuple[int, ...]:
    return tuple((word >> p) & 1 for p in range(P))


def or_combine(incoming: Sequence[tuple[Sequence[int], int]]) -> tuple[int, ...]:
    """Componentwise OR of the vectors whose local coefficient is 1."""
    if not incoming:
        raise ValueError("or_combine needs at least one input to know the vector length")
    P = len(incoming[0][0])
    out = 0
    for vec, b in incoming:
        if len(vec) != P:
            raise ValueError("mixing vectors of different lengths")
        if b:
            out |= pack(vec)
    return unpack(out, P)


def _witness(target: int, inputs: Sequence[int]) -> tuple[bool, tuple[int, ...]]:
    beta = tuple(int(v & ~target == 0) for v in inputs)
    acc = 0
    for v, b in zip(inputs, beta):
        if b:
            acc |= v
    return acc == target, beta


def achievable_by_or(target: Sequence[int], incoming: Sequence[Sequence[int]]):
    """Decide whether ``target`` is an OR of some subset of ``incoming``.

    Returns ``(True, beta)`` with the canonical witness (select exactly the
    inputs dominated by the target) or ``(False, None)``.  Inputs that are not
    dominated would overshoot, and if the dominated ones miss a target bit no
    subset can supply it, so the greedy witness is exact.
    """
    ok, beta = _witness(pack(target), [pack(v) for v in incoming])
    return (True, beta) if ok else (False, None)


@dataclass(frozen=True)
class MixingDesign:
    """Global mixing vectors ``x[edge][slot]`` (packed) and the set of active local coefficients.

    ``beta`` holds tuples ``(in_edge, out_edge, in_slot, out_slot)`` whose
    coefficient is 1.  ``None`` means "reconstruct from x when needed".
    """

    L: int
    x: tuple[tuple[int, ...], ...]
    beta: frozenset | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(tuple(int(w) for w in row) for row in self.x))
        if self.beta is not None:
            object.__setattr__(self, "beta", frozenset(tuple(b) for b in self.beta))

    def vector(self, k: int, l: int, P: int) -> tuple[int, ...]:
        return unpack(self.x[k][l], P)

    def mask(self, P: int) -> np.ndarray:
        """0/1 array of shape (E, L, P)."""
        out = np.zeros((len(self.x), self.L, P))
        for k, row in enumerate(self.x):
            for l, w in enumerate(row):
                for p in range(P):
                    if (w >> p) & 1:
                        out[k, l, p] = 1.0
        return out

    def with_beta(self, inst: NetworkInstance) -> "MixingDesign":
        if self.beta is not None:
            return self
        return MixingDesign(self.L, self.x, canonical_beta(inst, self.x, self.L))


def _inputs(inst: NetworkInstance, x, k: int, L: int) -> list[tuple[int, int, int]]:
    """(in_edge, in_slot, word) for every stream entering the tail of edge k."""
    tail = inst.edges[k].tail
    return [(ki, m, x[ki][m]) for ki in inst.in_edges[tail] for m in range(L)]


def canonical_beta(inst: NetworkInstance, x, L: int) -> frozenset:
    """Active local coefficients: each input dominated by the output stream feeds it."""
    beta = set()
    for k in inst.free_edges:
        for l in range(L):
            target = x[k][l]
            for ki, m, w in _inputs(inst, x, k, L):
                if w & ~target == 0 and w:
                    beta.add((ki, k, m, l))
    return frozenset(beta)


def propagate_design(inst: NetworkInstance, beta, L: int) -> MixingDesign:
    """Build x from sources outward by OR-ing the inputs selected by ``beta``."""
    beta = frozenset(beta)
    x = [[0] * L for _ in inst.edges]
    for k in inst.topo_edges:
        tail = inst.edges[k].tail
        if tail in inst.source_flow:
            x[k] = [1 << inst.source_flow[tail]] * L
            continue
        for l in range(L):
            acc = 0
            for ki, m, w in _inputs(inst, x, k, L):
                if (ki, k, m, l) in beta:
                    acc |= w
            x[k][l] = acc
    return MixingDesign(L, tuple(tuple(r) for r in x), beta)


class Violation(NamedTuple):
    constraint: str  # source | or | exclusion | delivery | shape | beta
    edge: tuple[int, int] | None
    slot: int | None
    flow: int | None
    terminal: int | None = None


def check_feasible_mixing(inst: NetworkInstance, design: MixingDesign) -> list[Violation]:
    """Every violated mixing constraint; empty iff the design is a feasible mixing.

    With ``design.beta is None`` the OR constraint is checked existentially
    (some choice of local coefficients reproduces each vector).
    """
    L, P = design.L, inst.P
    x = design.x
    if len(x) != inst.E or any(len(row) != L for row in x):
        return [Violation("shape", None, None, None)]
    out: list[Violation] = []
    full = (1 << P) - 1
    for k, row in enumerate(x):
        for l, w in enumerate(row):
            if w & ~full:
                out.append(Violation("shape", _pair(inst, k), l, None))
    if out:
        return out

    for k in range(inst.E):
        tail = inst.edges[k].tail
        if tail in inst.source_flow:
            p0 = inst.source_flow[tail]
            for l in range(L):
                for p in range(P):
                    if ((x[k][l] >> p) & 1) != (p == p0):
                        out.append(Violation("source", _pair(inst, k), l, p))

    if design.beta is not None:
        for b in design.beta:
            ki, k, m, l = b
            if not (0 <= ki < inst.E and 0 <= k < inst.E and 0 <= m < L and 0 <= l < L) or (
                inst.edges[ki].head != inst.edges[k].tail
            ):
                out.append(Violation("beta", None, None, None))

    for k in inst.free_edges:
        for l in range(L):
            ins = _inputs(inst, x, k, L)
            if design.beta is None:
                ok, _ = _witness(x[k][l], [w for _, _, w in ins])
                if not ok:
                    mixed = 0
                    for _, _, w in ins:
                        if w & ~x[k][l] == 0:
                            mixed |= w
                    bad = x[k][l] ^ mixed
                    for p in range(P):
                        if (bad >> p) & 1:
                            out.append(Violation("or", _pair(inst, k), l, p))
            else:
                acc = 0
                for ki, m, w in ins:
                    if (ki, k, m, l) in design.beta:
                        acc |= w
                bad = acc ^ x[k][l]
                for p in range(P):
                    if (bad >> p) & 1:
                        out.append(Violation("or", _pair(inst, k), l, p))

    for ti, t in enumerate(inst.terminals):
        dem = inst.demand_masks[ti]
        recv = 0
        for k in inst.in_edges[t.node]:
            for l in range(L):
                recv |= x[k][l]
                extra = x[k][l] & ~dem
                for p in range(P):
                    if (extra >> p) & 1:
                        out.append(Violation("exclusion", _pair(inst, k), l, p, ti))
        for p in t.demands:
            if not (recv >> p) & 1:
                out.append(Violation("delivery", None, None, p, ti))
    return out


def _pair(inst: NetworkInstance, k: int) -> tuple[int, int]:
    e = inst.edges[k]
    return (e.tail, e.head)


# --------------------------------------------------------------------------
# Clause form


@dataclass(frozen=True)
class Clause:
    """Clause for variable slot ``(edge, slot, flow)`` of a non-source edge.

    ``kind`` is ``"inner"`` (head is not a terminal), ``"demanded"`` (head is a
    terminal that wants the flow) or ``"excluded"`` (head is a terminal that
    does not).  ``"fixed"`` clauses carry constraints that involve no free
    variable at all; they evaluate to a constant.
    """

    edge: int
    slot: int
    flow: int
    kind: str
    terminal: int | None = None
    constant: bool = True

    def holds(self, inst: NetworkInstance, x, L: int, intra_flow: bool = False) -> bool:
        """Reference evaluation against full packed vectors ``x[edge][slot]``."""
        if self.kind == "fixed":
            return self.constant
        w = x[self.edge][self.slot]
        ok, _ = _witness(w, [v for _, _, v in _inputs(inst, x, self.edge, L)])
        if not ok:
            return False
        if intra_flow and bin(w).count("1") > 1:
            return False
        if self.kind == "demanded":
            head = inst.edges[self.edge].head
            return any((x[k][m] >> self.flow) & 1 for k in inst.in_edges[head] for m in range(L))
        if self.kind == "excluded":
            return not (w >> self.flow) & 1
        return True


class ClauseSystem:
    """The mixing CSP over the free bits ``x[edge][slot]`` of non-source edges.

    Variables are numbered in (edge in topological order, slot, flow) order.
    ``partition[v]`` lists the clauses variable ``v`` takes part in: its own
    clause, every clause on the out-edges of its head, and, when the head is a
    terminal, the clauses on the head's other in-edges.
    """

    def __init__(self, inst: NetworkInstance, L: int, intra_flow: bool = False):
        self.inst = inst
        self.L = L
        self.intra_flow = intra_flow
        P = inst.P
        self.free_edges = inst.free_edges
        self.variables = [(k, l, p) for k in self.free_edges for l in range(L) for p in range(P)]
        self.var_index = {v: i for i, v in enumerate(self.variables)}

        clauses: list[Clause] = []
        for k in self.free_edges:
            head = inst.edges[k].head
            ti = inst.terminal_at.get(head)
            for l in range(L):
                for p in range(P):
                    if ti is None:
                        clauses.append(Clause(k, l, p, "inner"))
                    elif p in inst.terminals[ti].demands:
                        clauses.append(Clause(k, l, p, "demanded", ti))
                    else:
                        clauses.append(Clause(k, l, p, "excluded", ti))
        clauses.extend(self._fixed_clauses())
        self.clauses = clauses
        self.clause_index = {(c.edge, c.slot, c.flow): i for i, c in enumerate(clauses) if c.kind != "fixed"}

        partition: dict[tuple[int, int, int], list[int]] = {}
        for (k, l, p) in self.variables:
            head = inst.edges[k].head
            ids = [self.clause_index[(k, l, p)]]
            for ko in inst.out_edges[head]:
                ids.extend(self.clause_index[(ko, m, p)] for m in range(L))
            if head in inst.terminal_at:
                for ki in inst.in_edges[head]:
                    if ki != k and (ki, 0, p) in self.clause_index:
                        ids.extend(self.clause_index[(ki, m, p)] for m in range(L))
            partition[(k, l, p)] = sorted(set(ids))
        self.partition = partition
        self._build_arrays()

    def _fixed_clauses(self) -> list[Clause]:
        inst, L = self.inst, self.L
        out = []
        for ti, t in enumerate(inst.terminals):
            dem = inst.demand_masks[ti]
            has_free = False
            src_recv = 0
            for k in inst.in_edges[t.node]:
                tail = inst.edges[k].tail
                if tail in inst.source_flow:
                    w = 1 << inst.source_flow[tail]
                    src_recv |= w
                    if w & ~dem:
                        out.append(Clause(k, 0, inst.source_flow[tail], "fixed", ti, False))
                else:
                    has_free = True
            if not has_free:
                for p in t.demands:
                    if not (src_recv >> p) & 1:
                        out.append(Clause(-1, 0, p, "fixed", ti, False))
        return out

    def _build_arrays(self):
        inst, L, P = self.inst, self.L, self.inst.P
        self.n_vars = len(self.variables)
        # word slots: one per (free edge, slot); source edges are constants
        self._slot_of = {}
        for k in self.free_edges:
            for l in range(L):
                self._slot_of[(k, l)] = len(self._slot_of)
        n_slots = len(self._slot_of)
        self._weights = np.array([1 << p for p in range(P)], dtype=object)
        # inputs per word slot: list of ('var', slot) or ('const', word)
        self._slot_inputs = []
        for k in self.free_edges:
            tail = inst.edges[k].tail
            for l in range(L):
                consts, refs = 0, []
                for ki in inst.in_edges[tail]:
                    t2 = inst.edges[ki].tail
                    for m in range(L):
                        if t2 in inst.source_flow:
                            consts = consts  # constants are dominated-or-not per target; keep list
                            refs.append((-1, 1 << inst.source_flow[t2]))
                        else:
                            refs.append((self._slot_of[(ki, m)], 0))
                self._slot_inputs.append(refs)
        # terminal receive sets
        self._term_refs = []
        for ti, t in enumerate(inst.terminals):
            refs, const = [], 0
            for k in inst.in_edges[t.node]:
                tail = inst.edges[k].tail
                if tail in inst.source_flow:
                    const |= 1 << inst.source_flow[tail]
                else:
                    refs.extend(self._slot_of[(k, m)] for m in range(L))
            self._term_refs.append((refs, const))

        kinds = {"inner": 0, "demanded": 1, "excluded": 2, "fixed": 3}
        self._c_slot = np.array([self._slot_of.get((c.edge, c.slot), -1) for c in self.clauses], dtype=np.int64)
        self._c_flow = np.array([c.flow for c in self.clauses], dtype=np.int64)
        self._c_kind = np.array([kinds[c.kind] for c in self.clauses], dtype=np.int64)
        self._c_term = np.array([-1 if c.terminal is None else c.terminal for c in self.clauses], dtype=np.int64)
        self._c_const = np.array([c.constant for c in self.clauses], dtype=bool)
        vi, ci = [], []
        for v, (key) in enumerate(self.variables):
            for c in self.partition[key]:
                vi.append(v)
                ci.append(c)
        self._inc_var = np.array(vi, dtype=np.int64)
        self._inc_clause = np.array(ci, dtype=np.int64)
        self.n_slots = n_slots

    # -- evaluation ---------------------------------------------------------

    def words(self, assign: np.ndarray) -> list[int]:
        """Packed vector per (free edge, slot) from a 0/1 assignment."""
        P = self.inst.P
        bits = np.asarray(assign, dtype=np.int64).reshape(self.n_slots, P)
        pw = np.left_shift(1, np.arange(P, dtype=np.int64)) if P < 63 else None
        if pw is not None:
            return [int(w) for w in bits @ pw]
        return [pack(row) for row in bits]

    def evaluate(self, assign: np.ndarray) -> np.ndarray:
        """Truth value of every clause under ``assign``."""
        P = self.inst.P
        words = self.words(assign)
        ach = np.empty(self.n_slots, dtype=bool)
        for s, refs in enumerate(self._slot_inputs):
            target = words[s]
            acc = 0
            for ref, const in refs:
                w = const if ref < 0 else words[ref]
                if w & ~target == 0:
                    acc |= w
            ach[s] = acc == target
        if self.intra_flow:
            for s in range(self.n_slots):
                if bin(words[s]).count("1") > 1:
                    ach[s] = False
        T = len(self._term_refs)
        recv = np.zeros((max(T, 1), P), dtype=bool)
        for ti, (refs, const) in enumerate(self._term_refs):
            acc = const
            for s in refs:
                acc |= words[s]
            for p in range(P):
                recv[ti, p] = (acc >> p) & 1
        own = np.asarray(assign, dtype=bool).reshape(self.n_slots, P)

        kind = self._c_kind
        out = np.empty(len(self.clauses), dtype=bool)
        fixed = kind == 3
        out[fixed] = self._c_const[fixed]
        live = ~fixed
        s, p, t = self._c_slot[live], self._c_flow[live], self._c_term[live]
        k = kind[live]
        val = ach[s].copy()
        dem = k == 1
        val[dem] &= recv[t[dem], p[dem]]
        exc = k == 2
        val[exc] &= ~own[s[exc], p[exc]]
        out[live] = val
        return out

    def unsatisfied_per_variable(self, truth: np.ndarray) -> np.ndarray:
        """Number of violated clauses in each variable's partition."""
        bad = (~truth[self._inc_clause]).astype(np.int64)
        return np.bincount(self._inc_var, weights=bad, minlength=self.n_vars)

    # -- conversion ---------------------------------------------------------

    def full_words(self, assign: np.ndarray) -> list[list[int]]:
        inst, L = self.inst, self.L
        x = [[0] * L for _ in inst.edges]
        for k in range(inst.E):
            tail = inst.edges[k].tail
            if tail in inst.source_flow:
                x[k] = [1 << inst.source_flow[tail]] * L
        words = self.words(assign)
        for (k, l), s in self._slot_of.items():
            x[k][l] = words[s]
        return x

    def decode(self, assign: np.ndarray) -> MixingDesign:
        """Design with the canonical local coefficients."""
        x = self.full_words(assign)
        return MixingDesign(self.L, tuple(map(tuple, x)), canonical_beta(self.inst, x, self.L))

    def encode(self, design: MixingDesign) -> np.ndarray:
        a = np.zeros(self.n_vars, dtype=bool)
        for i, (k, l, p) in enumerate(self.variables):
            a[i] = (design.x[k][l] >> p) & 1
        return a


def build_clauses(inst: NetworkInstance, L: int, intra_flow: bool = False) -> ClauseSystem:
    """Clause system for the mixing CSP at parameter ``L``.

    With ``intra_flow`` every stream may carry at most one flow.
    """
    if L < 1:
        raise ValueError("L must be positive")
    return ClauseSystem(inst, L, intra_flow)


# --------------------------------------------------------------------------
# Serialization


def design_to_dict(inst: NetworkInstance, design: MixingDesign) -> dict:
    P = inst.P
    x = {}
    for k, e in enumerate(inst.edges):
        x[f"{e.tail}-{e.head}"] = ["".join(str(b) for b in unpack(w, P)) for w in design.x[k]]
    beta = None
    if design.beta is not None:
        beta = sorted(
            [inst.edges[ki].tail, inst.edges[ki].head, inst.edges[k].head, m + 1, l + 1]
            for ki, k, m, l in design.beta
        )
    return {"L": design.L, "x": x, "beta": beta}


def design_from_dict(inst: NetworkInstance, d: dict) -> MixingDesign:
    L = d["L"]
    x = [[0] * L for _ in inst.edges]
    for key, vecs in d["x"].items():
        tail, head = (int(s) for s in key.split("-"))
        k = inst.edge_index[(tail, head)]
        x[k] = [pack([int(c) for c in s]) for s in vecs]
    beta = None
    if d.get("beta") is not None:
        beta = frozenset(
            (inst.edge_index[(a, b)], inst.edge_index[(b, c)], m - 1, l - 1) for a, b, c, m, l in d["beta"]
        )
    return MixingDesign(L, tuple(map(tuple, x)), beta)


def dumps_design(inst: NetworkInstance, design: MixingDesign) -> str:
    return json.dumps(design_to_dict(inst, design), indent=2) + "\n"


def loads_design(inst: NetworkInstance, text: str) -> MixingDesign:
    return design_from_dict(inst, json.loads(text))
