"""Dense GF(2) linear algebra kernels.

Everything here operates on 2-D numpy ``uint8`` arrays holding 0/1 values.
These routines back code construction (rank / logical-operator extraction)
and the small exact oracles used in tests; the decoder hot paths keep their
own bit-packed variants.
"""

from __future__ import annotations

import numpy as np


def as_gf2(mat) -> np.ndarray:
    """Coerce to a 2-D uint8 array reduced mod 2."""
    a = np.asarray(mat, dtype=np.uint8)
    if a.ndim == 1:
        a = a[None, :]
    return a & 1


def row_reduce(mat) -> tuple[np.ndarray, list[int]]:
    """Reduced row-echelon form over GF(2).

    Returns ``(rref, pivot_columns)``.  Pivot search is lowest-index-first so
    the result is deterministic.
    """
    a = as_gf2(mat).copy()
    n_rows, n_cols = a.shape
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        if r >= n_rows:
            break
        hits = np.nonzero(a[r:, c])[0]
        if hits.size == 0:
            continue
        p = hits[0] + r
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != r]
        if others.size:
            a[others] ^= a[r]
        pivots.append(c)
        r += 1
    return a, pivots


def rank(mat) -> int:
    """GF(2) rank."""
    return len(row_reduce(mat)[1])


def solve(mat, rhs) -> np.ndarray | None:
    """Solve ``mat @ x = rhs`` over GF(2).

    Returns one solution vector, or None when the system is inconsistent.
    """
    a = as_gf2(mat)
    b = as_gf2(rhs).reshape(-1)
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"rhs length {b.shape[0]} != row count {a.shape[0]}")
    aug = np.concatenate([a, b[:, None]], axis=1)
    red, pivots = row_reduce(aug)
    if pivots and pivots[-1] == a.shape[1]:  # pivot in the augmented column
        return None
    x = np.zeros(a.shape[1], dtype=np.uint8)
    for i, c in enumerate(pivots):
        x[c] = red[i, -1]
    return x


def nullspace(mat) -> np.ndarray:
    """Rows spanning the right null space of ``mat`` over GF(2).

    Shape ``(n_cols - rank, n_cols)``; returns an empty (0, n_cols) array for
    full-column-rank input.
    """
    a = as_gf2(mat)
    n_cols = a.shape[1]
    red, pivots = row_reduce(a)
    pivot_set = set(pivots)
    free = [c for c in range(n_cols) if c not in pivot_set]
    basis = np.zeros((len(free), n_cols), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, c in enumerate(pivots):
            basis[i, c] = red[row, f]
    return basis


def in_rowspace(mat, vec) -> bool:
    """True when ``vec`` lies in the GF(2) row space of ``mat``."""
    return solve(as_gf2(mat).T, vec) is not None


def coset_basis(subspace_rows, candidate_rows) -> np.ndarray:
    """Select candidates that extend ``subspace_rows`` to a larger span.

    Greedy lowest-index-first pass; the returned rows are independent of each
    other modulo the row space of ``subspace_rows``.
    """
    sub = as_gf2(subspace_rows)
    cands = as_gf2(candidate_rows)
    kept: list[np.ndarray] = []
    current = sub
    base_rank = rank(current)
    for row in cands:
        stacked = np.concatenate([current, row[None, :]], axis=0)
        r = rank(stacked)
        if r > base_rank:
            kept.append(row)
            current = stacked
            base_rank = r
    if not kept:
        return np.zeros((0, cands.shape[1]), dtype=np.uint8)
    return np.array(kept, dtype=np.uint8)
