"""Two-phase dense-tableau simplex.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq`` and
``x >= 0``.  The float mode uses Dantzig pricing and falls back to Bland's rule
after a run of degenerate pivots.  The exact mode runs the same pivots on
``fractions.Fraction`` entries (always Bland) and is meant for certifying small
instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = ["LPResult", "solve_lp"]


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: np.ndarray | None
    objective: float | Fraction | None
    iterations: int = 0


def _as_rows(A, b, n):
    if A is None or len(A) == 0:
        return np.zeros((0, n), dtype=object), np.zeros(0, dtype=object)
    return np.asarray(A, dtype=object).reshape(-1, n), np.asarray(b, dtype=object).reshape(-1)


def _to_exact(a):
    return np.vectorize(lambda v: Fraction(v) if not isinstance(v, Fraction) else v, otypes=[object])(a)


class _Tableau:
    def __init__(self, T, basis, exact, tol):
        self.T = T
        self.basis = basis
        self.exact = exact
        self.tol = 0 if exact else tol
        self.iterations = 0

    def pivot(self, r, c):
        T = self.T
        T[r] = T[r] / T[r, c]
        col = T[:, c].copy()
        col[r] = 0
        nz = np.nonzero(col if not self.exact else np.array([v != 0 for v in col]))[0]
        if len(nz):
            T[nz] -= np.outer(col[nz], T[r])
        if not self.exact:
            T[np.abs(T) < 1e-13] = 0.0
        self.basis[r] = c
        self.iterations += 1

    def run(self, ncols, max_iter):
        """Minimize the objective in the last row over the first ``ncols`` columns."""
        T = self.T
        m = T.shape[0] - 1
        degenerate = 0
        while True:
            if self.iterations >= max_iter:
                raise RuntimeError("simplex iteration limit reached")
            red = T[m, :ncols]
            bland = self.exact or degenerate > 50
            if bland:
                cand = [j for j in range(ncols) if red[j] < -self.tol]
                if not cand:
                    return "optimal"
                c = cand[0]
            else:
                c = int(np.argmin(red.astype(float)))
                if red[c] >= -self.tol:
                    return "optimal"
            colc = T[:m, c]
            rhs = T[:m, -1]
            best, r = None, -1
            for i in range(m):
                a = colc[i]
                if a > self.tol:
                    ratio = rhs[i] / a
                    if (
                        best is None
                        or ratio < best - (0 if self.exact else 1e-12)
                        or (abs(ratio - best) <= (0 if self.exact else 1e-12) and self.basis[i] < self.basis[r])
                    ):
                        best, r = ratio, i
            if r < 0:
                return "unbounded"
            degenerate = degenerate + 1 if best <= self.tol else 0
            self.pivot(r, c)


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, exact=False, tol=1e-9, max_iter=200000) -> LPResult:
    c = np.asarray(c, dtype=object if exact else float).reshape(-1)
    n = len(c)
    Au, bu = _as_rows(A_ub, b_ub, n)
    Ae, be = _as_rows(A_eq, b_eq, n)
    mu, me = len(bu), len(be)
    m = mu + me
    dtype = object if exact else float
    conv = _to_exact if exact else (lambda a: np.asarray(a, dtype=float))
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0

    # columns: original n, slacks mu, artificials (added as needed)
    A = np.full((m, n + mu), zero, dtype=dtype)
    b = np.full(m, zero, dtype=dtype)
    if mu:
        A[:mu, :n] = conv(Au)
        b[:mu] = conv(bu)
        for i in range(mu):
            A[i, n + i] = one
    if me:
        A[mu:, :n] = conv(Ae)
        b[mu:] = conv(be)
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]

    basis = [-1] * m
    art_rows = []
    for i in range(m):
        if i < mu and A[i, n + i] == one:
            basis[i] = n + i
        else:
            art_rows.append(i)
    na = len(art_rows)
    ncols = n + mu + na
    T = np.full((m + 1, ncols + 1), zero, dtype=dtype)
    T[:m, : n + mu] = A
    T[:m, -1] = b
    for a, i in enumerate(art_rows):
        T[i, n + mu + a] = one
        basis[i] = n + mu + a
    tab = _Tableau(T, basis, exact, tol)

    if na:
        # phase 1: minimize the sum of artificials
        T[m, :] = zero
        for a, i in enumerate(art_rows):
            T[m] = T[m] - T[i]
        for a in range(na):
            T[m, n + mu + a] = zero
        tab.run(ncols, max_iter)
        if -T[m, -1] > (0 if exact else max(tol, 1e-9) * max(1.0, float(np.max(np.abs(b.astype(float))) if m else 1.0))):
            return LPResult("infeasible", None, None, tab.iterations)
        # drive remaining artificials out of the basis
        keep = []
        for i in range(m):
            if basis[i] >= n + mu:
                row = T[i, : n + mu]
                js = [j for j in range(n + mu) if (row[j] != 0 if exact else abs(row[j]) > 1e-9)]
                if js:
                    tab.pivot(i, js[0])
                    keep.append(i)
            else:
                keep.append(i)
        T = np.vstack([T[keep], T[m : m + 1]])
        basis = [basis[i] for i in keep]
        m = len(keep)
        T = np.hstack([T[:, : n + mu], T[:, -1:]])
        tab = _Tableau(T, basis, exact, tol)
        tab.iterations = 0
    ncols = n + mu
    T = tab.T
    T[m, :] = zero
    T[m, :n] = c if exact else c.astype(float)
    if exact:
        T[m, :n] = _to_exact(c)
    for i, j in enumerate(basis):
        if T[m, j] != 0:
            T[m] = T[m] - T[m, j] * T[i]
    status = tab.run(ncols, max_iter)
    if status == "unbounded":
        return LPResult("unbounded", None, None, tab.iterations)
    x = np.full(n, zero, dtype=dtype)
    for i, j in enumerate(tab.basis):
        if j < n:
            x[j] = T[i, -1]
    obj = -T[m, -1]
    if not exact:
        x = np.maximum(x, 0.0)
        obj = float(c @ x)
    return LPResult("optimal", x, obj, tab.iterations)
