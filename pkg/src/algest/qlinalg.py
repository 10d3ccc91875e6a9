"""Exact Gaussian elimination over QQ (gmpy mpq entries)."""
from __future__ import annotations

from typing import Callable, Sequence

from sympy import QQ

__all__ = ["rref", "rank", "det", "nullspace", "solve_any"]


def _copy(rows: Sequence[Sequence]) -> list[list]:
    return [[QQ(x) if isinstance(x, int) else x for x in row] for row in rows]


def rref(rows: Sequence[Sequence]) -> tuple[list[list], list[int]]:
    """Reduced row echelon form and pivot columns."""
    a = _copy(rows)
    if not a:
        return a, []
    n_rows, n_cols = len(a), len(a[0])
    pivots = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        p = next((i for i in range(r, n_rows) if a[i][c]), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(n_rows):
            if i != r and a[i][c]:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a, pivots


def rank(rows: Sequence[Sequence]) -> int:
    return len(rref(rows)[1])


def det(rows: Sequence[Sequence]):
    a = _copy(rows)
    n = len(a)
    sign = 1
    acc = QQ(1)
    for c in range(n):
        p = next((i for i in range(c, n) if a[i][c]), None)
        if p is None:
            return QQ(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            sign = -sign
        piv = a[c][c]
        acc *= piv
        for i in range(c + 1, n):
            if a[i][c]:
                f = a[i][c] / piv
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return acc * sign


def nullspace(rows: Sequence[Sequence], n_cols: int | None = None) -> list[list]:
    """Basis of {v : rows @ v = 0}."""
    n_cols = n_cols if n_cols is not None else len(rows[0])
    if not rows:
        return [[QQ(int(i == j)) for i in range(n_cols)] for j in range(n_cols)]
    a, pivots = rref(rows)
    free = [c for c in range(n_cols) if c not in pivots]
    basis = []
    for f in free:
        v = [QQ(0)] * n_cols
        v[f] = QQ(1)
        for r, pc in enumerate(pivots):
            v[pc] = -a[r][f]
        basis.append(v)
    return basis


def solve_any(rows: Sequence[Sequence], rhs: Sequence, draw: Callable[[], object]) -> list:
    """One solution of ``rows @ v = rhs``; free variables take values from ``draw()``.

    Raises ``ValueError`` if the system is inconsistent.
    """
    n_cols = len(rows[0])
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    a, pivots = rref(aug)
    if n_cols in pivots:
        raise ValueError("inconsistent linear system")
    free = [c for c in range(n_cols) if c not in pivots]
    v = [QQ(0)] * n_cols
    for f in free:
        v[f] = draw()
    for r, pc in enumerate(pivots):
        v[pc] = a[r][n_cols] - sum((a[r][f] * v[f] for f in free), QQ(0))
    return v
