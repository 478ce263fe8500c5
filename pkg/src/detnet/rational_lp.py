"""Exact simplex over Fractions for small LPs of the form max c.x, A x <= b, x >= 0, b >= 0."""

from __future__ import annotations

from fractions import Fraction
from typing import List, Sequence, Tuple


class Unbounded(ArithmeticError):
    pass


def maximize(c: Sequence[Fraction], A: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> Tuple[Fraction, List[Fraction]]:
    """Primal simplex with Bland's rule; the origin is the starting basis.

    Bland's rule makes both termination and the returned vertex
    deterministic for a given row/column order.
    """
    m, n = len(A), len(c)
    if any(bi < 0 for bi in b):
        raise ValueError("right-hand side must be nonnegative")
    # tableau rows: [A | I | b]
    T = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(m)] + [Fraction(b[i])] for i, row in enumerate(A)]
    obj = [-Fraction(x) for x in c] + [Fraction(0)] * m + [Fraction(0)]
    basis = [n + i for i in range(m)]
    width = n + m
    while True:
        enter = next((j for j in range(width) if obj[j] < 0), None)
        if enter is None:
            break
        leave = None
        best = None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            raise Unbounded("objective is unbounded")
        piv = T[leave][enter]
        T[leave] = [x / piv for x in T[leave]]
        prow = T[leave]
        for i in range(m):
            if i != leave and T[i][enter] != 0:
                f = T[i][enter]
                T[i] = [x - f * y for x, y in zip(T[i], prow)]
        if obj[enter] != 0:
            f = obj[enter]
            obj = [x - f * y for x, y in zip(obj, prow)]
        basis[leave] = enter
    x = [Fraction(0)] * n
    for i, bv in enumerate(basis):
        if bv < n:
            x[bv] = T[i][-1]
    return obj[-1], x
