"""Exact linear algebra over the field of Exprs.

All routines clear denominators row by row and run fraction-free (Bareiss)
elimination.  Pivots are chosen deterministically: the first row with a
symbolically nonzero entry in the leftmost unresolved column.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

from sympy.polys.domains import QQ, ZZ
from sympy.polys.matrices import DomainMatrix

from .errors import NotSquare
from .expr import ONE, ZERO, Expr, as_expr, poly_gcd, poly_lcm

ExprVector = tuple  # tuple[Expr, ...]


class ExprMatrix:
    """Dense row-major matrix of Exprs."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, rows: int, cols: int, entries: Iterable):
        entries = tuple(as_expr(e) for e in entries)
        if len(entries) != rows * cols:
            raise ValueError(f"{rows}x{cols} matrix needs {rows * cols} entries, got {len(entries)}")
        self.rows = rows
        self.cols = cols
        self.entries = entries

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "ExprMatrix":
        rows = [list(r) for r in rows]
        ncols = len(rows[0]) if rows else 0
        if any(len(r) != ncols for r in rows):
            raise ValueError("ragged rows")
        return cls(len(rows), ncols, [e for r in rows for e in r])

    @classmethod
    def from_columns(cls, cols: Sequence[Sequence]) -> "ExprMatrix":
        cols = [list(c) for c in cols]
        nrows = len(cols[0]) if cols else 0
        return cls.from_rows([[c[i] for c in cols] for i in range(nrows)]) if cols else cls(0, 0, [])

    @classmethod
    def identity(cls, n: int) -> "ExprMatrix":
        return cls(n, n, [ONE if i == j else ZERO for i in range(n) for j in range(n)])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "ExprMatrix":
        return cls(rows, cols, [ZERO] * (rows * cols))

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> ExprVector:
        return self.entries[i * self.cols:(i + 1) * self.cols]

    def column(self, j: int) -> ExprVector:
        return tuple(self.entries[i * self.cols + j] for i in range(self.rows))

    def row_list(self) -> list[list[Expr]]:
        return [list(self.row(i)) for i in range(self.rows)]

    def transpose(self) -> "ExprMatrix":
        return ExprMatrix.from_columns(self.row_list()) if self.rows else ExprMatrix(0, 0, [])

    def __matmul__(self, other):
        if isinstance(other, ExprMatrix):
            if self.cols != other.rows:
                raise ValueError("shape mismatch")
            out = []
            for i in range(self.rows):
                for j in range(other.cols):
                    acc = ZERO
                    for k in range(self.cols):
                        acc = acc + self[i, k] * other[k, j]
                    out.append(acc)
            return ExprMatrix(self.rows, other.cols, out)
        vec = tuple(as_expr(v) for v in other)
        if len(vec) != self.cols:
            raise ValueError("shape mismatch")
        return tuple(
            sum((self[i, k] * vec[k] for k in range(self.cols)), ZERO) for i in range(self.rows)
        )

    def map(self, fn) -> "ExprMatrix":
        return ExprMatrix(self.rows, self.cols, [fn(e) for e in self.entries])

    def __eq__(self, other):
        return (isinstance(other, ExprMatrix) and self.rows == other.rows
                and self.cols == other.cols and self.entries == other.entries)

    def __hash__(self):
        return hash((self.rows, self.cols, self.entries))

    def __repr__(self):
        body = "; ".join(", ".join(str(e) for e in self.row(i)) for i in range(self.rows))
        return f"ExprMatrix[{body}]"


def denominator_lcm(exprs: Iterable[Expr]) -> Expr:
    out = ONE
    for e in exprs:
        if not e.is_zero and not e.is_polynomial:
            out = poly_lcm(out, e.denominator())
    return out


def _cleared(rows: list[list[Expr]]) -> tuple[list[list[Expr]], Expr]:
    """Multiply each row by the lcm of its denominators; return rows and the product of multipliers."""
    scale = ONE
    out = []
    for r in rows:
        m = denominator_lcm(r)
        if m != ONE:
            r = [e * m for e in r]
            scale = scale * m
        out.append(list(r))
    return out, scale


def det(M: ExprMatrix) -> Expr:
    """Determinant by Bareiss elimination on the row-cleared matrix."""
    if M.rows != M.cols:
        raise NotSquare(f"determinant of a {M.rows}x{M.cols} matrix")
    n = M.rows
    if n == 0:
        return ONE
    A, scale = _cleared(M.row_list())
    sign = 1
    prev = ONE
    for k in range(n - 1):
        if A[k][k].is_zero:
            for i in range(k + 1, n):
                if not A[i][k].is_zero:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return ZERO
        piv = A[k][k]
        for i in range(k + 1, n):
            a = A[i][k]
            for j in range(k + 1, n):
                A[i][j] = (piv * A[i][j] - a * A[k][j]) / prev
            A[i][k] = ZERO
        prev = piv
    out = A[n - 1][n - 1] / scale
    return -out if sign < 0 else out


def _echelon(rows: list[list[Expr]], ncols: int) -> tuple[list[list[Expr]], list[int]]:
    """Fraction-free row echelon form restricted to the first ``ncols`` columns."""
    A, _ = _cleared(rows)
    m = len(A)
    width = len(A[0]) if A else 0
    pivots: list[int] = []
    r = 0
    prev = ONE
    for c in range(ncols):
        if r == m:
            break
        p = next((i for i in range(r, m) if not A[i][c].is_zero), None)
        if p is None:
            continue
        if p != r:
            A[r], A[p] = A[p], A[r]
        piv = A[r][c]
        for i in range(r + 1, m):
            a = A[i][c]
            row = A[i]
            top = A[r]
            for j in range(c + 1, width):
                row[j] = (piv * row[j] - a * top[j]) / prev
            row[c] = ZERO
        prev = piv
        pivots.append(c)
        r += 1
    return A, pivots


def rank_generic(M: ExprMatrix) -> int:
    """Rank over the Expr field, i.e. the rank at generic points."""
    if M.rows == 0 or M.cols == 0:
        return 0
    _, pivots = _echelon(M.row_list(), M.cols)
    return len(pivots)


def _back_substitute(A, pivots: list[int], ncols: int, rhs_col: int | None, free_values: dict) -> list[Expr]:
    x = [ZERO] * ncols
    for j, v in free_values.items():
        x[j] = v
    for k in range(len(pivots) - 1, -1, -1):
        c = pivots[k]
        row = A[k]
        acc = row[rhs_col] if rhs_col is not None else ZERO
        for j in range(c + 1, ncols):
            if not row[j].is_zero and not x[j].is_zero:
                acc = acc - row[j] * x[j]
        x[c] = acc / row[c]
    return x


def solve_linear(M: ExprMatrix, b: Sequence) -> ExprVector | None:
    """One solution of ``M x = b`` (free variables set to zero), or None if inconsistent."""
    b = [as_expr(v) for v in b]
    if len(b) != M.rows:
        raise ValueError("right-hand side has the wrong length")
    if M.cols == 0:
        return () if all(v.is_zero for v in b) else None
    rows = [list(M.row(i)) + [b[i]] for i in range(M.rows)]
    A, pivots = _echelon(rows, M.cols + 1)
    if pivots and pivots[-1] == M.cols:
        return None
    return tuple(_back_substitute(A, pivots, M.cols, M.cols, {}))


def primitive_part(vec: Sequence[Expr]) -> ExprVector:
    """Scale a vector to polynomial entries with trivial common gcd."""
    vec = [as_expr(v) for v in vec]
    m = denominator_lcm(vec)
    vec = [v * m for v in vec]
    g = ZERO
    for v in vec:
        if not v.is_zero:
            g = poly_gcd(g, v)
    if not g.is_zero and g != ONE:
        vec = [v / g for v in vec]
    return tuple(vec)


def kernel_basis(M: ExprMatrix) -> list[ExprVector]:
    """Basis of the right kernel, each vector cleared to polynomial entries."""
    if M.cols == 0:
        return []
    if M.rows == 0:
        return [tuple(ONE if i == j else ZERO for i in range(M.cols)) for j in range(M.cols)]
    A, pivots = _echelon(M.row_list(), M.cols)
    free = [j for j in range(M.cols) if j not in pivots]
    basis = []
    for j in free:
        x = _back_substitute(A, pivots, M.cols, None, {j: ONE})
        basis.append(primitive_part(x))
    return basis


def rational_nullspace(rows: Sequence, ncols: int) -> list[list[Fraction]]:
    """Nullspace basis over Q of an integer matrix.

    ``rows`` holds dense integer rows or sparse ``{column: value}`` dicts.
    """
    rows = [r for r in rows if any(r.values() if isinstance(r, dict) else r)]
    if not rows:
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    sparse = {}
    for i, r in enumerate(rows):
        items = r.items() if isinstance(r, dict) else enumerate(r)
        sparse[i] = {j: ZZ(int(v)) for j, v in items if v}
    M = DomainMatrix(sparse, (len(rows), ncols), ZZ)
    N = M.convert_to(QQ).nullspace().to_dense()
    return [[Fraction(int(v.numerator), int(v.denominator)) for v in row] for row in N.to_list()]
