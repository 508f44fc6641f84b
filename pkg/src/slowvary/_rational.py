"""Exact linear algebra over the rationals.

The optional exact mode stores matrices as numpy object arrays holding
``fractions.Fraction`` entries.  numpy's elementwise arithmetic and ``@``
work on those unchanged; everything that needs division with pivoting
(solving, nullspaces) is implemented here by straightforward Gauss-Jordan
elimination.  Sizes in exact mode stay tiny (a few dozen rows), so clarity
beats asymptotics.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def frac(x) -> Fraction:
    """Coerce ints, rational strings like ``"8/27"``, floats, and Fractions."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


def frac_matrix(rows) -> np.ndarray:
    """Object array of Fractions from a nested sequence."""
    data = [[frac(x) for x in row] for row in rows]
    out = np.empty((len(data), len(data[0]) if data else 0), dtype=object)
    for i, row in enumerate(data):
        if len(row) != out.shape[1]:
            raise ValueError("ragged matrix rows")
        for j, x in enumerate(row):
            out[i, j] = x
    return out


def is_exact(a) -> bool:
    return isinstance(a, np.ndarray) and a.dtype == object


def as_float(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=float)


def exact_zeros(shape) -> np.ndarray:
    return np.full(shape, Fraction(0), dtype=object)


def exact_eye(n: int) -> np.ndarray:
    out = exact_zeros((n, n))
    for i in range(n):
        out[i, i] = Fraction(1)
    return out


def _rref(rows: list[list[Fraction]], ncols: int) -> list[int]:
    """In-place reduced row echelon form; returns the pivot column list.

    Only the first ``ncols`` columns are eligible as pivots; trailing
    columns ride along as right-hand sides.
    """
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        # largest entry by magnitude keeps intermediate fractions smaller
        best, best_mag = -1, Fraction(0)
        for i in range(r, len(rows)):
            mag = abs(rows[i][c])
            if mag > best_mag:
                best, best_mag = i, mag
        if best < 0:
            continue
        rows[r], rows[best] = rows[best], rows[r]
        piv = rows[r][c]
        rows[r] = [x / piv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return pivots


def solve_exact(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``A x = B`` exactly; A may be rectangular.

    Requires the system to be consistent with a unique solution (full
    column rank); raises ValueError otherwise.  B may be a vector or a
    matrix of stacked right-hand sides.
    """
    A = np.asarray(A, dtype=object)
    b_was_vector = B.ndim == 1
    Bm = B.reshape(-1, 1) if b_was_vector else B
    nr, nc = A.shape
    if Bm.shape[0] != nr:
        raise ValueError("right-hand side has wrong length")
    rows = [[frac(A[i, j]) for j in range(nc)] + [frac(Bm[i, k]) for k in range(Bm.shape[1])]
            for i in range(nr)]
    pivots = _rref(rows, nc)
    if len(pivots) < nc:
        raise ValueError("exact solve: system is underdetermined (rank deficient)")
    for i in range(len(pivots), nr):
        if any(x != 0 for x in rows[i][nc:]):
            raise ValueError("exact solve: system is inconsistent")
    out = exact_zeros((nc, Bm.shape[1]))
    for r, c in enumerate(pivots):
        for k in range(Bm.shape[1]):
            out[c, k] = rows[r][nc + k]
    return out[:, 0] if b_was_vector else out


def nullspace_exact(A: np.ndarray) -> np.ndarray:
    """Basis for the exact nullspace of A, as columns; shape (n, dim)."""
    A = np.asarray(A, dtype=object)
    nr, nc = A.shape
    rows = [[frac(A[i, j]) for j in range(nc)] for i in range(nr)]
    pivots = _rref(rows, nc)
    free = [c for c in range(nc) if c not in pivots]
    basis = exact_zeros((nc, len(free)))
    for k, fc in enumerate(free):
        basis[fc, k] = Fraction(1)
        for r, pc in enumerate(pivots):
            basis[pc, k] = -rows[r][fc]
    return basis


def inverse_exact(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("inverse of a non-square matrix")
    return solve_exact(A, exact_eye(n))
