"""
Exact linear algebra over the rationals.

Matrices are lists of rows of Fractions.
"""
import logging
from fractions import Fraction
from typing import Any, List, Sequence, Tuple

from utils.errors import MatrixError

logger = logging.getLogger(__name__)

Matrix = List[List[Fraction]]


def to_matrix(rows: Sequence[Sequence[Any]]) -> Matrix:
    matrix = [[Fraction(v) for v in row] for row in rows]
    if matrix and any(len(row) != len(matrix[0]) for row in matrix):
        raise MatrixError("Ragged matrix rows")
    return matrix


def determinant(rows: Sequence[Sequence[Any]]) -> Fraction:
    """
    Fraction-free (Bareiss) elimination with row pivoting.

    Args:
        rows: Square matrix

    Returns:
        Fraction: Exact determinant
    """
    a = to_matrix(rows)
    n = len(a)
    if any(len(row) != n for row in a):
        raise MatrixError(f"Determinant needs a square matrix, got {n}x{len(a[0]) if a else 0}")
    if n == 0:
        return Fraction(1)

    sign = 1
    previous = Fraction(1)
    for k in range(n - 1):
        if a[k][k] == 0:
            pivot = next((r for r in range(k + 1, n) if a[r][k] != 0), None)
            if pivot is None:
                return Fraction(0)
            a[k], a[pivot] = a[pivot], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / previous
            a[i][k] = Fraction(0)
        previous = a[k][k]
    return sign * a[n - 1][n - 1]


def rref(rows: Sequence[Sequence[Any]]) -> Tuple[Matrix, List[int]]:
    """
    Reduced row echelon form.

    Returns:
        Tuple[Matrix, List[int]]: Reduced matrix and pivot columns
    """
    a = to_matrix(rows)
    if not a:
        return a, []
    n_rows, n_cols = len(a), len(a[0])
    pivots: List[int] = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        pivot = next((i for i in range(r, n_rows) if a[i][c] != 0), None)
        if pivot is None:
            continue
        a[r], a[pivot] = a[pivot], a[r]
        lead = a[r][c]
        a[r] = [v / lead for v in a[r]]
        for i in range(n_rows):
            if i != r and a[i][c] != 0:
                factor = a[i][c]
                a[i] = [x - factor * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a, pivots


def rank(rows: Sequence[Sequence[Any]]) -> int:
    return len(rref(rows)[1])


def nullspace(rows: Sequence[Sequence[Any]], n_cols: int = None) -> List[List[Fraction]]:
    """
    Basis of { v : rows v = 0 }, one vector per free column.

    Args:
        rows: Matrix
        n_cols (int): Column count, needed when rows is empty

    Returns:
        List[List[Fraction]]: Basis vectors, each with a 1 in its free column
    """
    reduced, pivots = rref(rows)
    if n_cols is None:
        if not reduced:
            raise MatrixError("nullspace of an empty matrix needs n_cols")
        n_cols = len(reduced[0])
    basis = []
    for free in (c for c in range(n_cols) if c not in pivots):
        v = [Fraction(0)] * n_cols
        v[free] = Fraction(1)
        for row, c in zip(reduced, pivots):
            v[c] = -row[free]
        basis.append(v)
    return basis


def mat_vec(rows: Sequence[Sequence[Fraction]], v: Sequence[Fraction]) -> List[Fraction]:
    return [sum((x * y for x, y in zip(row, v)), Fraction(0)) for row in rows]
