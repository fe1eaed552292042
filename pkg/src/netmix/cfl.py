"""Communication-free learning for the mixing CSP.

Each variable keeps a Bernoulli parameter.  In every synchronous round all
variables sample, every clause is evaluated on the joint sample, and each
variable updates from the clauses it takes part in: if they all hold, it locks
onto its current value; otherwise the probability of the failing value shrinks
by the factor ``1 - b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExhausted
from .mixing import ClauseSystem

__all__ = ["CflParams", "CflState", "init_state", "cfl_iterate", "solve_csp"]

_BLOCK = 256


@dataclass
class CflParams:
    b: float = 0.1
    max_iter: int | None = None  # default: 10 rounds per clause
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.b < 1:
            raise ValueError("learning parameter b must lie in (0, 1)")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


class _Streams:
    """One independent generator per variable, consumed in blocks.

    Variable ``v`` always reads the ``r``-th number of its own stream in round
    ``r``, so the trajectory does not depend on how rounds are batched.
    """

    def __init__(self, n: int, seed: int):
        self.gens = [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]
        self.buf = np.empty((n, 0))
        self.pos = 0

    def next(self) -> np.ndarray:
        if self.pos >= self.buf.shape[1]:
            if self.gens:
                self.buf = np.stack([g.random(_BLOCK) for g in self.gens])
            else:
                self.buf = np.empty((0, _BLOCK))
            self.pos = 0
        u = self.buf[:, self.pos]
        self.pos += 1
        return u


@dataclass
class CflState:
    q: np.ndarray  # probability of selecting 1
    assign: np.ndarray
    iteration: int = 0
    streams: _Streams | None = field(default=None, repr=False)
    n_unsat: int = -1


def init_state(system: ClauseSystem, seed: int = 0) -> CflState:
    n = system.n_vars
    return CflState(np.full(n, 0.5), np.zeros(n, dtype=bool), 0, _Streams(n, seed))


def cfl_iterate(state: CflState, system: ClauseSystem, b: float = 0.1) -> CflState:
    """One synchronous round: sample, evaluate, update."""
    u = state.streams.next()
    assign = u < state.q
    truth = system.evaluate(assign)
    bad = system.unsatisfied_per_variable(truth) > 0
    q = np.where(assign, 1.0, 0.0)
    # failing value a loses a fraction b of its mass to the other value
    q_bad = np.where(assign, (1 - b) * state.q, state.q + b * (1 - state.q))
    q = np.where(bad, q_bad, q)
    return CflState(q, assign, state.iteration + 1, state.streams, int((~truth).sum()))


def solve_csp(system: ClauseSystem, params: CflParams | None = None, trace: list | None = None) -> np.ndarray:
    """Run rounds until one sample satisfies every clause.

    The returned assignment is re-checked with a fresh evaluation.  Raises
    ``BudgetExhausted`` (never a proof of infeasibility) when the budget runs
    out.  ``trace`` collects ``(round, unsatisfied clauses)`` pairs.
    """
    params = params or CflParams()
    budget = params.max_iter if params.max_iter is not None else 10 * max(len(system.clauses), 1)
    state = init_state(system, params.seed)
    if not system.clauses:
        return state.assign
    for _ in range(budget):
        state = cfl_iterate(state, system, params.b)
        if trace is not None:
            trace.append((state.iteration, state.n_unsat))
        if state.n_unsat == 0 and system.evaluate(state.assign).all():
            return state.assign
    raise BudgetExhausted(f"no satisfying assignment after {budget} rounds", state=state, iterations=budget)
