"""
Existence checks for polynomial Stein operators of bounded shape.

An operator sum_{i<=d, j<=o} a_ij x^i f^(j) annihilates the target's moments
iff E[A x^k] = sum a_ij (k)_j mu_(k-j+i) = 0 for every k. Truncating at k <= K
gives an exact linear system in the a_ij whose nullspace holds every
candidate of that shape.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import config
from models.moment_sequence import MomentSequence
from models.opweyl import OperatorPoly, falling_factorial
from optimization.batching import BatchProcessor
from utils import exact_linalg
from utils.errors import MatrixError, MomentError

logger = logging.getLogger(__name__)

Column = Tuple[int, int]


@dataclass(frozen=True)
class ShapeGrid:
    """Operators with D-order <= max_order and M-degree <= max_degree."""

    max_order: int
    max_degree: int

    def __post_init__(self):
        if self.max_order < 0 or self.max_degree < 0:
            raise MatrixError(f"Shape bounds must be nonnegative, got ({self.max_order}, {self.max_degree})")

    @property
    def unknowns(self) -> int:
        return (self.max_degree + 1) * (self.max_order + 1)

    def columns(self, ordering: str = "descending") -> List[Column]:
        """
        Unknowns (i, j) in display order ("descending": j descending, then i
        descending) or canonical order ("canonical": (i, j) lexicographic).
        """
        cells = [(i, j) for i in range(self.max_degree + 1) for j in range(self.max_order + 1)]
        if ordering == "descending":
            return sorted(cells, key=lambda c: (-c[1], -c[0]))
        if ordering == "canonical":
            return sorted(cells)
        raise MatrixError(f"Unknown column ordering {ordering!r}")


@dataclass
class MomentMatrix:
    """Rows k = 0..K, columns a_ij; entry (k)_j mu_(k-j+i)."""

    rows: List[List[Fraction]]
    columns: List[Column]
    shape: ShapeGrid

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    def is_square(self) -> bool:
        return self.n_rows == self.n_cols

    def reordered(self, columns: Sequence[Column]) -> Tuple["MomentMatrix", int]:
        """
        Same system with permuted columns.

        Returns:
            Tuple[MomentMatrix, int]: Reordered matrix and the permutation sign
        """
        index = {c: n for n, c in enumerate(self.columns)}
        try:
            perm = [index[c] for c in columns]
        except KeyError as e:
            raise MatrixError(f"Column {e} is not an unknown of this matrix")
        if len(perm) != len(self.columns):
            raise MatrixError("Reordering must list every column exactly once")
        rows = [[row[p] for p in perm] for row in self.rows]
        return MomentMatrix(rows, list(columns), self.shape), permutation_sign(perm)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "columns": [f"a_{i},{j}" for i, j in self.columns],
            "rows": [[str(v) for v in row] for row in self.rows],
        }


def permutation_sign(perm: Sequence[int]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        n = start
        while not seen[n]:
            seen[n] = True
            n = perm[n]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def build_matrix(m: MomentSequence, shape: ShapeGrid, K: Optional[int] = None,
                 ordering: str = "descending") -> MomentMatrix:
    """
    Moment constraint system for one shape.

    Args:
        m (MomentSequence): Target moments
        shape (ShapeGrid): Operator shape
        K (int): Highest test monomial; defaults to unknowns - 1 (square)
        ordering (str): Column order, "descending" or "canonical"

    Returns:
        MomentMatrix: Exact system
    """
    if K is None:
        K = shape.unknowns - 1
    if K < 0:
        raise MatrixError(f"K must be nonnegative, got {K}")
    columns = shape.columns(ordering)
    try:
        m.extend_to(K + shape.max_degree)
    except ZeroDivisionError as e:
        raise MomentError(f"Could not extend {m.name} to order {K + shape.max_degree}: {e}")

    rows = []
    for k in range(K + 1):
        row = []
        for i, j in columns:
            weight = falling_factorial(k, j)
            row.append(weight * m[k - j + i] if weight else Fraction(0))
        rows.append(row)
    return MomentMatrix(rows, columns, shape)


def determinant(mx: MomentMatrix) -> Fraction:
    if not mx.is_square():
        raise MatrixError(f"Determinant needs a square system, got {mx.n_rows}x{mx.n_cols}")
    return exact_linalg.determinant(mx.rows)


def nullspace(mx: MomentMatrix) -> List[List[Fraction]]:
    """Exact right-nullspace basis in the matrix's column order; empty iff only the zero operator fits."""
    return exact_linalg.nullspace(mx.rows, mx.n_cols)


def coefficient_vector(op: OperatorPoly, columns: Sequence[Column]) -> List[Fraction]:
    """Coefficients of op in the given column order; op must fit the shape."""
    wanted = set(columns)
    outside = [key for key in op.terms if key not in wanted]
    if outside:
        raise MatrixError(f"Operator has terms {outside} outside the shape")
    return [op.coefficient(i, j) for i, j in columns]


def operator_from_vector(vector: Sequence[Fraction], columns: Sequence[Column]) -> OperatorPoly:
    return OperatorPoly({c: v for c, v in zip(columns, vector)})


def annihilates(mx: MomentMatrix, op: OperatorPoly) -> bool:
    """True if op's coefficient vector lies in the nullspace of mx."""
    vector = coefficient_vector(op, mx.columns)
    return all(v == 0 for v in exact_linalg.mat_vec(mx.rows, vector))


@dataclass
class ShapeResult:
    order: int
    degree: int
    unknowns: int
    rows: int
    rank: int
    nullity: int
    determinant: Optional[Fraction] = None
    basis: List[OperatorPoly] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "order": self.order,
            "degree": self.degree,
            "unknowns": self.unknowns,
            "rows": self.rows,
            "rank": self.rank,
            "nullity": self.nullity,
            "determinant": None if self.determinant is None else str(self.determinant),
            "basis": [op.to_text() for op in self.basis],
        }


@dataclass
class ScanReport:
    """Nullspace dimension per shape; a certificate for bounded shapes only."""

    target: str
    results: List[ShapeResult]

    @property
    def minimal_shapes(self) -> List[Tuple[int, int]]:
        """Nonempty shapes with no smaller nonempty shape below them."""
        nonempty = [(r.order, r.degree) for r in self.results if r.nullity > 0]
        return sorted(s for s in nonempty
                      if not any(o <= s[0] and d <= s[1] and (o, d) != s for o, d in nonempty))

    def get(self, order: int, degree: int) -> ShapeResult:
        for result in self.results:
            if (result.order, result.degree) == (order, degree):
                return result
        raise KeyError((order, degree))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "target": self.target,
            "shapes": [r.to_dict() for r in self.results],
            "minimal_shapes": [list(s) for s in self.minimal_shapes],
        }


def analyze_shape(m: MomentSequence, shape: ShapeGrid, K: Optional[int] = None) -> ShapeResult:
    """
    Rank, nullspace and (for square systems) determinant of one shape.

    Args:
        m (MomentSequence): Target moments
        shape (ShapeGrid): Operator shape
        K (int): Highest test monomial; defaults to unknowns - 1 + config.MINIMALITY_EXTRA_ROWS

    Returns:
        ShapeResult: Result for the shape
    """
    if K is None:
        K = shape.unknowns - 1 + config.MINIMALITY_EXTRA_ROWS
    if K + 1 < shape.unknowns:
        raise MatrixError(f"K={K} gives fewer rows than the {shape.unknowns} unknowns of "
                          f"shape ({shape.max_order}, {shape.max_degree})")
    mx = build_matrix(m, shape, K)
    basis = nullspace(mx)
    result = ShapeResult(
        order=shape.max_order,
        degree=shape.max_degree,
        unknowns=shape.unknowns,
        rows=mx.n_rows,
        rank=shape.unknowns - len(basis),
        nullity=len(basis),
        determinant=determinant(mx) if mx.is_square() else None,
        basis=[operator_from_vector(v, mx.columns).primitive() for v in basis],
    )
    logger.debug(f"shape ({shape.max_order}, {shape.max_degree}) of {m.name}: nullity {result.nullity}")
    return result


def minimality_scan(m: MomentSequence, max_order_bound: int, max_degree_bound: int,
                    K: Optional[int] = None, max_workers: Optional[int] = None) -> ScanReport:
    """
    Scan every shape (o, d) with o <= max_order_bound, d <= max_degree_bound.

    Args:
        m (MomentSequence): Target moments
        max_order_bound (int): Largest D-order
        max_degree_bound (int): Largest M-degree
        K (int): Highest test monomial for every shape (default: per-shape over-determined)
        max_workers (int): Thread count for the shapes

    Returns:
        ScanReport: One result per shape
    """
    shapes = [ShapeGrid(o, d) for o in range(max_order_bound + 1) for d in range(max_degree_bound + 1)]
    deepest = max(s.unknowns for s in shapes) + config.MINIMALITY_EXTRA_ROWS + max_degree_bound
    if K is not None:
        deepest = K + max_degree_bound
    # Moments are extended once up front so the workers only read the cache.
    m.extend_to(deepest)

    processor = BatchProcessor(max_workers=max_workers, batch_size=1)
    results = processor.run(lambda shape: analyze_shape(m, shape, K), shapes)
    logger.info(f"minimality scan of {m.name}: {len(shapes)} shapes, "
                f"{processor.get_statistics()['total_processing_time']:.3f}s")
    return ScanReport(m.name, results)


def descending_column_order(shape: ShapeGrid) -> List[Column]:
    return shape.columns("descending")


def canonical_column_order(shape: ShapeGrid) -> List[Column]:
    return shape.columns("canonical")
