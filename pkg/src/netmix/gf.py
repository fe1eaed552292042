"""Arithmetic and linear algebra over prime fields GF(q).

Elements are plain integers in ``0..q-1``; vectors and matrices are int64
numpy arrays.  ``q`` must be prime and small enough that products fit in 63
bits (q < 2**31).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["is_prime", "GF", "rank", "solve_combination"]


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    d = 3
    while d * d <= q:
        if q % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class GF:
    q: int

    def __post_init__(self):
        if not is_prime(self.q):
            raise ValueError(f"field size {self.q} is not prime")
        if self.q >= 2**31:
            raise ValueError("field size too large for int64 arithmetic")

    def add(self, a, b):
        return (a + b) % self.q

    def sub(self, a, b):
        return (a - b) % self.q

    def mul(self, a, b):
        return (a * b) % self.q

    def neg(self, a):
        return (-a) % self.q

    def inv(self, a: int) -> int:
        a = int(a) % self.q
        if a == 0:
            raise ZeroDivisionError("zero has no inverse")
        return pow(a, self.q - 2, self.q)

    def matmul(self, A, B):
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        if self.q < 2**26:
            # partial sums stay below 2**63 for the sizes used here
            return (A @ B) % self.q
        out = np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
        for j in range(A.shape[1]):
            out = (out + np.outer(A[:, j], B[j]) % self.q) % self.q
        return out

    def random(self, rng, size=None, nonzero=False):
        lo = 1 if nonzero else 0
        return rng.integers(lo, self.q, size=size, dtype=np.int64)

    def row_reduce(self, M):
        """Reduced row echelon form; returns ``(R, pivot_columns)``."""
        R = np.array(M, dtype=np.int64) % self.q
        if R.ndim != 2:
            raise ValueError("expected a matrix")
        rows, cols = R.shape
        piv = []
        r = 0
        for c in range(cols):
            if r == rows:
                break
            nz = np.nonzero(R[r:, c])[0]
            if len(nz) == 0:
                continue
            i = r + int(nz[0])
            if i != r:
                R[[r, i]] = R[[i, r]]
            R[r] = (R[r] * self.inv(R[r, c])) % self.q
            others = np.nonzero(R[:, c])[0]
            others = others[others != r]
            if len(others):
                R[others] = (R[others] - np.outer(R[others, c], R[r])) % self.q
            piv.append(c)
            r += 1
        return R, piv


def rank(M, q: int) -> int:
    M = np.asarray(M)
    if M.size == 0:
        return 0
    return len(GF(q).row_reduce(M)[1])


def solve_combination(M, target, q: int):
    """Coefficients ``y`` with ``y @ M == target`` over GF(q), or None."""
    F = GF(q)
    M = np.asarray(M, dtype=np.int64) % q
    target = np.asarray(target, dtype=np.int64) % q
    if M.shape[0] == 0:
        return np.zeros(0, dtype=np.int64) if not target.any() else None
    # solve M^T y = target via the augmented system
    aug = np.concatenate([M.T, target[:, None]], axis=1)
    R, piv = F.row_reduce(aug)
    if M.shape[0] in piv:
        return None
    y = np.zeros(M.shape[0], dtype=np.int64)
    for i, c in enumerate(piv):
        y[c] = R[i, -1]
    return y
