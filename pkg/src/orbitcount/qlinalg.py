"""Small exact linear algebra over Q (lists of Fractions).

Only what the algebra code needs: row reduction, rank, nullspace,
solving and span membership.  Matrices are lists of rows.
"""
from fractions import Fraction


def as_frac_matrix(rows):
    return [[Fraction(v) for v in row] for row in rows]


def rref(rows, ncols=None):
    """Reduced row echelon form.  Returns (R, pivot_columns)."""
    A = as_frac_matrix(rows)
    if not A:
        return [], []
    ncols = len(A[0]) if ncols is None else ncols
    pivots = []
    r = 0
    for c in range(ncols):
        if r == len(A):
            break
        p = next((i for i in range(r, len(A)) if A[i][c] != 0), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        inv = 1 / A[r][c]
        A[r] = [v * inv for v in A[r]]
        for i in range(len(A)):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
    return A[:r], pivots


def rank(rows):
    return len(rref(rows)[1]) if rows else 0


def nullspace(rows, ncols):
    """Basis of {y : A y = 0} as a list of vectors."""
    if not rows:
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    R, piv = rref(rows, ncols)
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for fc in free:
        v = [Fraction(0)] * ncols
        v[fc] = Fraction(1)
        for i, pc in enumerate(piv):
            v[pc] = -R[i][fc]
        basis.append(v)
    return basis


def solve(rows, rhs):
    """One exact solution of A y = rhs, or None if inconsistent.

    Free variables are set to zero.
    """
    ncols = len(rows[0]) if rows else 0
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    R, piv = rref(aug, ncols + 1)
    if ncols in piv:
        return None
    y = [Fraction(0)] * ncols
    for i, pc in enumerate(piv):
        y[pc] = R[i][ncols]
    return y


def matmul(A, B):
    return [[sum((a * b for a, b in zip(row, col)), Fraction(0)) for col in zip(*B)] for row in A]


def transpose(A):
    return [list(c) for c in zip(*A)]


def in_span(vectors, v):
    if not vectors:
        return all(x == 0 for x in v)
    return rank(vectors + [v]) == rank(vectors)


def independent_subset(vectors):
    """Indices of a maximal independent subset, greedy in the given order."""
    keep = []
    current = []
    r = 0
    for i, v in enumerate(vectors):
        trial = current + [v]
        rk = rank(trial)
        if rk > r:
            keep.append(i)
            current = trial
            r = rk
    return keep
