"""Cholesky factorization and solves for symmetric banded matrices.

Storage is lower band form: ``band[k, j] = A[j + k, j]`` for ``k <= bw``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class NotPositiveDefinite(ArithmeticError):
    pass


def to_lower_banded(A, bw):
    """Sparse symmetric matrix -> lower band storage of half-bandwidth ``bw``."""
    A = sp.coo_matrix(A)
    keep = A.row >= A.col
    rows, cols, vals = A.row[keep], A.col[keep], A.data[keep]
    if np.any(rows - cols > bw):
        raise ValueError("matrix exceeds the declared bandwidth")
    band = np.zeros((bw + 1, A.shape[0]))
    np.add.at(band, (rows - cols, cols), vals)
    return band


def cholesky_banded(band):
    """Return ``L`` (same storage) with ``A = L L^T``.

    Right-looking: each pivot column updates the trailing ``bw x bw`` window.
    """
    L = np.array(band, dtype=float)
    bw, n = L.shape[0] - 1, L.shape[1]
    p, q = np.tril_indices(bw)
    for j in range(n):
        d = L[0, j]
        if not d > 0:
            raise NotPositiveDefinite(f"non-positive pivot {d:g} at row {j}")
        L[0, j] = d = np.sqrt(d)
        m = min(bw, n - 1 - j)
        col = L[1:m + 1, j] / d
        L[1:m + 1, j] = col
        if m:
            sel = p < m
            L[p[sel] - q[sel], j + 1 + q[sel]] -= col[p[sel]] * col[q[sel]]
    return L


def cho_solve_banded(L, rhs):
    """Solve ``L L^T x = rhs`` for a factor from :func:`cholesky_banded`."""
    bw, n = L.shape[0] - 1, L.shape[1]
    x = np.array(rhs, dtype=float)
    for j in range(n):
        x[j] /= L[0, j]
        m = min(bw, n - 1 - j)
        if m:
            x[j + 1:j + m + 1] -= np.multiply.outer(L[1:m + 1, j], x[j])
    for j in range(n - 1, -1, -1):
        m = min(bw, n - 1 - j)
        if m:
            x[j] -= L[1:m + 1, j] @ x[j + 1:j + m + 1]
        x[j] /= L[0, j]
    return x
