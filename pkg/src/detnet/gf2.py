"""Small GF(2) linear algebra on int bitsets.

A vector of length n is an int whose bit j holds entry j.  A matrix is a
tuple of row ints plus a column count; bit c of a row is column c.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple


def parity(x: int) -> int:
    return bin(x).count("1") & 1


def rank_of_rows(rows: Iterable[int]) -> int:
    """Rank over GF(2) of a list of row bitsets (xor basis insertion)."""
    basis: dict[int, int] = {}
    for r in rows:
        while r:
            top = r.bit_length() - 1
            if top in basis:
                r ^= basis[top]
            else:
                basis[top] = r
                break
    return len(basis)


def in_span(vec: int, rows: Sequence[int]) -> bool:
    return rank_of_rows(list(rows) + [vec]) == rank_of_rows(rows)


@dataclass(frozen=True)
class GF2Matrix:
    rows: Tuple[int, ...]
    ncols: int

    def __post_init__(self) -> None:
        if self.ncols < 0:
            raise ValueError("negative column count")
        limit = 1 << self.ncols
        for r in self.rows:
            if r < 0 or r >= limit:
                raise ValueError(f"row {r:#x} does not fit in {self.ncols} columns")

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> Tuple[int, int]:
        return (len(self.rows), self.ncols)

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "GF2Matrix":
        return cls((0,) * nrows, ncols)

    @classmethod
    def identity(cls, n: int) -> "GF2Matrix":
        return cls(tuple(1 << i for i in range(n)), n)

    @classmethod
    def from_lists(cls, entries: Sequence[Sequence[int]], ncols: Optional[int] = None) -> "GF2Matrix":
        if ncols is None:
            ncols = len(entries[0]) if entries else 0
        rows = []
        for row in entries:
            if len(row) != ncols:
                raise ValueError("ragged matrix")
            rows.append(sum((b & 1) << c for c, b in enumerate(row)))
        return cls(tuple(rows), ncols)

    def to_lists(self) -> List[List[int]]:
        return [[(r >> c) & 1 for c in range(self.ncols)] for r in self.rows]

    def __getitem__(self, idx: Tuple[int, int]) -> int:
        i, j = idx
        return (self.rows[i] >> j) & 1

    def rank(self) -> int:
        return rank_of_rows(self.rows)

    def column(self, j: int) -> int:
        """Column j as a bitset over rows."""
        out = 0
        for i, r in enumerate(self.rows):
            if (r >> j) & 1:
                out |= 1 << i
        return out

    def transpose(self) -> "GF2Matrix":
        return GF2Matrix(tuple(self.column(j) for j in range(self.ncols)), len(self.rows))

    def apply(self, vec: int) -> int:
        """Matrix-vector product; vec has ncols bits, result has nrows bits."""
        out = 0
        for i, r in enumerate(self.rows):
            if parity(r & vec):
                out |= 1 << i
        return out

    def __matmul__(self, other: "GF2Matrix") -> "GF2Matrix":
        if self.ncols != other.nrows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        rows = []
        for r in self.rows:
            acc = 0
            k = 0
            while r:
                if r & 1:
                    acc ^= other.rows[k]
                r >>= 1
                k += 1
            rows.append(acc)
        return GF2Matrix(tuple(rows), other.ncols)

    def __add__(self, other: "GF2Matrix") -> "GF2Matrix":
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return GF2Matrix(tuple(a ^ b for a, b in zip(self.rows, other.rows)), self.ncols)

    def select_columns(self, cols: Sequence[int]) -> "GF2Matrix":
        rows = []
        for r in self.rows:
            acc = 0
            for k, c in enumerate(cols):
                if (r >> c) & 1:
                    acc |= 1 << k
            rows.append(acc)
        return GF2Matrix(tuple(rows), len(cols))

    def to_hex(self) -> List[str]:
        width = max(1, (self.ncols + 3) // 4)
        return [format(r, f"0{width}x") for r in self.rows]

    @classmethod
    def from_hex(cls, rows: Sequence[str], ncols: int) -> "GF2Matrix":
        return cls(tuple(int(h, 16) for h in rows), ncols)


def hstack(mats: Sequence[GF2Matrix]) -> GF2Matrix:
    if not mats:
        raise ValueError("nothing to stack")
    n = mats[0].nrows
    if any(m.nrows != n for m in mats):
        raise ValueError("row count mismatch in hstack")
    rows = [0] * n
    offset = 0
    for m in mats:
        for i, r in enumerate(m.rows):
            rows[i] |= r << offset
        offset += m.ncols
    return GF2Matrix(tuple(rows), offset)


def vstack(mats: Sequence[GF2Matrix]) -> GF2Matrix:
    if not mats:
        raise ValueError("nothing to stack")
    n = mats[0].ncols
    if any(m.ncols != n for m in mats):
        raise ValueError("column count mismatch in vstack")
    return GF2Matrix(tuple(r for m in mats for r in m.rows), n)


def block_diag(mats: Sequence[GF2Matrix]) -> GF2Matrix:
    ncols = sum(m.ncols for m in mats)
    rows: List[int] = []
    offset = 0
    for m in mats:
        rows.extend(r << offset for r in m.rows)
        offset += m.ncols
    return GF2Matrix(tuple(rows), ncols)


def independent_columns(rows: Sequence[int], cols: Sequence[int], base_rows: Sequence[int] = ()) -> List[int]:
    """Greedily pick columns (given as row-space bitsets) independent modulo a base span.

    ``rows`` are the candidate column vectors, ``cols`` their labels; returns the
    labels of a maximal subset that is linearly independent together with
    ``base_rows``.
    """
    basis: dict[int, int] = {}

    def insert(v: int) -> bool:
        while v:
            top = v.bit_length() - 1
            if top in basis:
                v ^= basis[top]
            else:
                basis[top] = v
                return True
        return False

    for b in base_rows:
        insert(b)
    chosen = []
    for v, label in zip(rows, cols):
        if insert(v):
            chosen.append(label)
    return chosen


def left_annihilating_decoder(sig_cols: Sequence[int], int_cols: Sequence[int], nrows: int) -> Optional[List[int]]:
    """Find functionals w_j (row bitsets over nrows) with w_j . int = 0 and w_j . sig_k = [j == k].

    Columns are given as bitsets over the ``nrows`` received coordinates.
    Returns None when the signal columns are not independent modulo the
    interference span.
    """
    m = len(sig_cols)
    cols = list(int_cols) + list(sig_cols)
    n_int = len(int_cols)
    # Unknown w (nrows bits). Equations: w . col_c = target_c for each column.
    # Solve by Gaussian elimination on the augmented system, one RHS per j.
    eqs = [(c, 0) for c in cols]  # (coefficient bitset, rhs bits over j)
    for k in range(m):
        c, _ = eqs[n_int + k]
        eqs[n_int + k] = (c, 1 << k)
    pivots: List[Tuple[int, int, int]] = []  # (pivot bit, coeffs, rhs)
    for coeffs, rhs in eqs:
        for pbit, pc, pr in pivots:
            if (coeffs >> pbit) & 1:
                coeffs ^= pc
                rhs ^= pr
        if coeffs == 0:
            if rhs:
                return None
            continue
        pbit = coeffs.bit_length() - 1
        new_piv = []
        for qb, qc, qr in pivots:
            if (qc >> pbit) & 1:
                qc ^= coeffs
                qr ^= rhs
            new_piv.append((qb, qc, qr))
        new_piv.append((pbit, coeffs, rhs))
        pivots = new_piv
    # Free variables set to zero; pivot variable = rhs (row is reduced).
    decoders = []
    for j in range(m):
        w = 0
        for pbit, _, pr in pivots:
            if (pr >> j) & 1:
                w |= 1 << pbit
        decoders.append(w)
    return decoders
