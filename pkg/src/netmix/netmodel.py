"""Network instances: directed acyclic graphs carrying general connections.

Flows and slots are 0-based everywhere in the Python API.  The canonical JSON
instance format (and every human-facing message) numbers flows from 1, the way
the CLI does.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GenerationFailed

__all__ = [
    "CostFunction",
    "Edge",
    "Flow",
    "Terminal",
    "NetworkInstance",
    "RandomInstanceParams",
    "validate_instance",
    "atom_partition",
    "format_atoms",
    "l_max",
    "discrete_variable_count",
    "generate_random_instance",
    "instance_to_dict",
    "instance_from_dict",
    "dumps_instance",
    "loads_instance",
    "load_instance",
    "save_instance",
    "fig2_instance",
    "butterfly_instance",
]


@dataclass(frozen=True)
class CostFunction:
    """Edge cost ``a*z`` (linear) or ``a*z + b*z**2`` (quadratic), with a, b >= 0."""

    kind: str = "linear"
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "quadratic"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.kind == "linear" and self.b != 0:
            raise ValueError("linear cost takes no quadratic coefficient")

    def __call__(self, z):
        return self.a * z + self.b * z * z

    def derivative(self, z):
        return self.a + 2.0 * self.b * z

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "a": self.a}
        if self.kind == "quadratic":
            d["b"] = self.b
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CostFunction":
        return cls(kind=d["kind"], a=d["a"], b=d.get("b", 0))


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    capacity: float
    cost: CostFunction = field(default_factory=CostFunction)


@dataclass(frozen=True)
class Flow:
    source: int
    rate: float


@dataclass(frozen=True)
class Terminal:
    node: int
    demands: tuple[int, ...]  # 0-based flow indices

    def __post_init__(self):
        object.__setattr__(self, "demands", tuple(sorted(set(self.demands))))


@dataclass(frozen=True)
class NetworkInstance:
    """Immutable network with flows and terminal demand sets.

    Derived lookup tables are cached on first use; the instance is safe to share.
    """

    nodes: tuple[int, ...]
    edges: tuple[Edge, ...]
    flows: tuple[Flow, ...]
    terminals: tuple[Terminal, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "flows", tuple(self.flows))
        object.__setattr__(self, "terminals", tuple(self.terminals))

    @property
    def P(self) -> int:
        return len(self.flows)

    @property
    def T(self) -> int:
        return len(self.terminals)

    @property
    def E(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(e.tail, e.head): k for k, e in enumerate(self.edges)}

    @cached_property
    def in_edges(self) -> dict[int, tuple[int, ...]]:
        acc: dict[int, list[int]] = {v: [] for v in self.nodes}
        for k, e in enumerate(self.edges):
            acc.setdefault(e.head, []).append(k)
        return {v: tuple(ks) for v, ks in acc.items()}

    @cached_property
    def out_edges(self) -> dict[int, tuple[int, ...]]:
        acc: dict[int, list[int]] = {v: [] for v in self.nodes}
        for k, e in enumerate(self.edges):
            acc.setdefault(e.tail, []).append(k)
        return {v: tuple(ks) for v, ks in acc.items()}

    @cached_property
    def source_flow(self) -> dict[int, int]:
        """Map source node -> flow index."""
        return {f.source: p for p, f in enumerate(self.flows)}

    @cached_property
    def terminal_at(self) -> dict[int, int]:
        """Map terminal node -> terminal index."""
        return {t.node: k for k, t in enumerate(self.terminals)}

    @cached_property
    def demand_masks(self) -> tuple[int, ...]:
        return tuple(sum(1 << p for p in t.demands) for t in self.terminals)

    @cached_property
    def topo_order(self) -> tuple[int, ...]:
        order = _kahn(self.nodes, self.edges)
        if order is None:
            raise ValueError("graph contains a cycle")
        return order

    @cached_property
    def topo_edges(self) -> tuple[int, ...]:
        """Edge indices sorted by the topological rank of their tails."""
        rank = {v: r for r, v in enumerate(self.topo_order)}
        return tuple(sorted(range(self.E), key=lambda k: (rank[self.edges[k].tail], rank[self.edges[k].head])))

    @cached_property
    def commodities(self) -> tuple[tuple[int, int], ...]:
        """All (terminal index, flow index) pairs with the flow demanded by the terminal."""
        return tuple((ti, p) for ti, t in enumerate(self.terminals) for p in t.demands)

    def is_source_edge(self, k: int) -> bool:
        return self.edges[k].tail in self.source_flow

    @cached_property
    def free_edges(self) -> tuple[int, ...]:
        """Edges whose tail is not a source, in topological order."""
        return tuple(k for k in self.topo_edges if not self.is_source_edge(k))

    @cached_property
    def max_degree(self) -> int:
        degs = [len(self.in_edges[v]) for v in self.nodes] + [len(self.out_edges[v]) for v in self.nodes]
        return max(degs, default=0)

    @property
    def all_linear(self) -> bool:
        return all(e.cost.is_linear for e in self.edges)


def _kahn(nodes: Sequence[int], edges: Sequence[Edge]) -> tuple[int, ...] | None:
    indeg = {v: 0 for v in nodes}
    succ: dict[int, list[int]] = {v: [] for v in nodes}
    for e in edges:
        if e.tail not in indeg or e.head not in indeg:
            continue
        indeg[e.head] += 1
        succ[e.tail].append(e.head)
    queue = deque(sorted(v for v in nodes if indeg[v] == 0))
    order = []
    while queue:
        v = queue.popleft()
        order.append(v)
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    if len(order) != len(indeg):
        return None
    return tuple(order)


def validate_instance(inst: NetworkInstance) -> list[str]:
    """Return a message for every violated model assumption (empty if valid)."""
    report: list[str] = []
    nodes = set(inst.nodes)
    if len(nodes) != len(inst.nodes):
        report.append("duplicate node identifiers")
    seen = set()
    for e in inst.edges:
        if e.tail not in nodes or e.head not in nodes:
            report.append(f"edge ({e.tail},{e.head}) references an unknown node")
        if e.tail == e.head:
            report.append(f"self-loop on node {e.tail}")
        if (e.tail, e.head) in seen:
            report.append(f"duplicate edge ({e.tail},{e.head})")
        seen.add((e.tail, e.head))
        if e.capacity < 0:
            report.append(f"negative capacity on edge ({e.tail},{e.head})")
        if e.cost.a < 0 or e.cost.b < 0:
            report.append(f"negative cost coefficient on edge ({e.tail},{e.head})")
    if _kahn(inst.nodes, inst.edges) is None:
        report.append("graph contains a cycle")

    sources: dict[int, int] = {}
    for p, f in enumerate(inst.flows):
        if f.source not in nodes:
            report.append(f"flow {p + 1} has unknown source node {f.source}")
        if not f.rate > 0:
            report.append(f"non-positive rate for flow {p + 1}")
        if f.source in sources:
            report.append(f"flows {sources[f.source] + 1} and {p + 1} share source node {f.source}")
        sources.setdefault(f.source, p)
    term_nodes = set()
    for t in inst.terminals:
        if t.node not in nodes:
            report.append(f"terminal node {t.node} is unknown")
        if t.node in term_nodes:
            report.append(f"terminal node {t.node} listed twice")
        term_nodes.add(t.node)
        if not t.demands:
            report.append(f"terminal {t.node} has an empty demand set")
        for p in t.demands:
            if not 0 <= p < inst.P:
                report.append(f"terminal {t.node} demands unknown flow {p + 1}")
        if t.node in sources:
            report.append(f"node {t.node} is both a source and a terminal")
    for e in inst.edges:
        if e.head in sources:
            report.append(f"source has incoming edge ({e.tail},{e.head})")
        if e.tail in term_nodes:
            report.append(f"terminal has outgoing edge ({e.tail},{e.head})")
    demanded = set()
    for t in inst.terminals:
        demanded.update(t.demands)
    for p in range(inst.P):
        if p not in demanded:
            report.append(f"undemanded flow {p + 1}")
    return report


def atom_partition(inst: NetworkInstance) -> tuple[frozenset[int], ...]:
    """Atoms of the algebra generated by the demand sets.

    Flows are grouped by their membership signature across terminals, which
    yields exactly the non-empty intersections of demand sets and complements.
    Atoms are ordered by their smallest flow.
    """
    groups: dict[tuple[bool, ...], list[int]] = {}
    for p in range(inst.P):
        sig = tuple(p in t.demands for t in inst.terminals)
        groups.setdefault(sig, []).append(p)
    return tuple(sorted((frozenset(g) for g in groups.values()), key=min))


def format_atoms(atoms: Iterable[Iterable[int]]) -> str:
    """Render atoms 1-based, e.g. ``{{1,2},{3}}``."""
    return "{" + ",".join("{" + ",".join(str(p + 1) for p in sorted(a)) + "}" for a in atoms) + "}"


def l_max(inst: NetworkInstance) -> int:
    return len(atom_partition(inst))


def discrete_variable_count(inst: NetworkInstance, L: int) -> int:
    """Number of local mixing coefficients: ``L**2 * sum over edges (i,j) of indeg(i)``."""
    if L < 1:
        raise ValueError("L must be positive")
    return L * L * sum(len(inst.in_edges[e.tail]) for e in inst.edges)


# --------------------------------------------------------------------------
# Random instances


@dataclass(frozen=True)
class RandomInstanceParams:
    n_nodes: int = 7
    edge_prob: float = 0.4
    n_flows: int = 2
    n_terminals: int = 2
    demand_density: float = 0.6
    capacity_range: tuple[float, float] = (1.0, 3.0)
    cost_kind: str = "linear"
    cost_range: tuple[float, float] = (1.0, 3.0)
    rate_range: tuple[float, float] = (1.0, 1.0)
    max_retries: int = 200


def _reachable(inst: NetworkInstance, src: int) -> set[int]:
    seen = {src}
    stack = [src]
    while stack:
        v = stack.pop()
        for k in inst.out_edges[v]:
            w = inst.edges[k].head
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def _draw(rng: np.random.Generator, lo: float, hi: float) -> float:
    if lo == hi:
        return lo
    return round(float(rng.uniform(lo, hi)), 3)


def generate_random_instance(params: RandomInstanceParams, seed: int) -> NetworkInstance:
    """Random valid instance, deterministic in ``seed``.

    Edges only point forward in a random topological order, sources are the
    first nodes of that order and terminals the last, so every draw is acyclic
    and respects the source/terminal degree assumptions.  Source edges into
    terminals that do not want the source's flow are dropped.  Draws where
    some demanded flow cannot reach its terminal are rejected and redrawn.
    """
    n, P, T = params.n_nodes, params.n_flows, params.n_terminals
    if P < 1 or T < 1 or P + T > n:
        raise GenerationFailed(f"cannot place {P} sources and {T} terminals on {n} nodes")
    rng = np.random.default_rng(seed)
    for _ in range(params.max_retries):
        order = [int(v) for v in rng.permutation(n)]
        sources, terminals = order[:P], order[n - T:]
        src_set, term_set = set(sources), set(terminals)
        edges = []
        for a in range(n):
            u = order[a]
            if u in term_set:
                continue
            for b in range(a + 1, n):
                v = order[b]
                if v in src_set or rng.random() >= params.edge_prob:
                    continue
                if params.cost_kind == "linear":
                    cost = CostFunction("linear", _draw(rng, *params.cost_range))
                else:
                    cost = CostFunction("quadratic", _draw(rng, *params.cost_range), _draw(rng, *params.cost_range))
                edges.append(Edge(u, v, _draw(rng, *params.capacity_range), cost))
        demands = [[p for p in range(P) if rng.random() < params.demand_density] for _ in range(T)]
        for ti in range(T):
            if not demands[ti]:
                demands[ti] = [int(rng.integers(P))]
        covered = set().union(*map(set, demands))
        if len(covered) != P:
            continue
        # a source edge always carries its flow, so it may not enter a terminal that refuses it
        src_of = {s: p for p, s in enumerate(sources)}
        refuses = {t: set(range(P)) - set(d) for t, d in zip(terminals, demands)}
        edges = [e for e in edges if not (e.tail in src_of and src_of[e.tail] in refuses.get(e.head, ()))]
        inst = NetworkInstance(
            nodes=tuple(range(n)),
            edges=tuple(edges),
            flows=tuple(Flow(s, _draw(rng, *params.rate_range)) for s in sources),
            terminals=tuple(Terminal(t, tuple(d)) for t, d in zip(terminals, demands)),
        )
        reach = [_reachable(inst, f.source) for f in inst.flows]
        if all(t.node in reach[p] for t in inst.terminals for p in t.demands):
            return inst
    raise GenerationFailed(f"no connected instance after {params.max_retries} draws")


# --------------------------------------------------------------------------
# Canonical JSON format


def instance_to_dict(inst: NetworkInstance) -> dict:
    return {
        "nodes": list(inst.nodes),
        "edges": [
            {"tail": e.tail, "head": e.head, "capacity": e.capacity, "cost": e.cost.to_dict()}
            for e in inst.edges
        ],
        "flows": [{"source": f.source, "rate": f.rate} for f in inst.flows],
        "terminals": [{"node": t.node, "demands": [p + 1 for p in t.demands]} for t in inst.terminals],
    }


def instance_from_dict(d: dict) -> NetworkInstance:
    return NetworkInstance(
        nodes=tuple(d["nodes"]),
        edges=tuple(
            Edge(e["tail"], e["head"], e["capacity"], CostFunction.from_dict(e["cost"])) for e in d["edges"]
        ),
        flows=tuple(Flow(f["source"], f["rate"]) for f in d["flows"]),
        terminals=tuple(Terminal(t["node"], tuple(p - 1 for p in t["demands"])) for t in d["terminals"]),
    )


def dumps_instance(inst: NetworkInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2) + "\n"


def loads_instance(text: str) -> NetworkInstance:
    return instance_from_dict(json.loads(text))


def load_instance(path) -> NetworkInstance:
    return loads_instance(Path(path).read_text())


def save_instance(inst: NetworkInstance, path) -> None:
    Path(path).write_text(dumps_instance(inst))


# --------------------------------------------------------------------------
# Reference instances


def fig2_instance(rate: float = 1, capacity: float = 2) -> NetworkInstance:
    """Three sources, two terminals; terminal 6 wants flows {1,2}, terminal 7 wants all three."""
    pairs = [(1, 6), (1, 4), (2, 7), (2, 4), (3, 4), (4, 5), (5, 6), (5, 7)]
    return NetworkInstance(
        nodes=tuple(range(1, 8)),
        edges=tuple(Edge(i, j, capacity, CostFunction("linear", 1)) for i, j in pairs),
        flows=(Flow(1, rate), Flow(2, rate), Flow(3, rate)),
        terminals=(Terminal(6, (0, 1)), Terminal(7, (0, 1, 2))),
    )


def butterfly_instance(rate: float = 1, bottleneck: float = 1, capacity: float = 2) -> NetworkInstance:
    """Two-source butterfly multicast: both terminals want both flows.

    Nodes: sources 1, 2; coding node 3 -> 4 is the bottleneck; terminals 5, 6.
    """
    spec = [(1, 5), (1, 3), (2, 3), (2, 6), (3, 4), (4, 5), (4, 6)]
    edges = tuple(
        Edge(i, j, bottleneck if (i, j) == (3, 4) else capacity, CostFunction("linear", 1)) for i, j in spec
    )
    return NetworkInstance(
        nodes=(1, 2, 3, 4, 5, 6),
        edges=edges,
        flows=(Flow(1, rate), Flow(2, rate)),
        terminals=(Terminal(5, (0, 1)), Terminal(6, (0, 1))),
    )
