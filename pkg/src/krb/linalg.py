"""Linear-algebra kernels and the affine parametric operator.

Vectors are 1-D ``float64`` numpy arrays, dense matrices are 2-D ``float64``
arrays and sparse matrices are canonical ``scipy.sparse.csr_matrix`` objects
(column indices sorted within each row, duplicates summed).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, TypeAlias

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from krb.config import DROP_TOL, SINGULAR_PIVOT_TOL
from krb.exceptions import (
    ArityMismatchError,
    DimensionMismatchError,
    NotPositiveDefiniteError,
    ParameterDomainError,
    SingularReducedSystemError,
)

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

Vector: TypeAlias = "NDArray[np.float64]"
DenseMatrix: TypeAlias = "NDArray[np.float64]"
SparseMatrix: TypeAlias = sp.csr_matrix


def as_vector(x: ArrayLike, name: str = "x") -> Vector:
    """Convert to a finite, nonempty 1-D float64 array."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise DimensionMismatchError(f"{name} must be a nonempty vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has nonfinite entries")
    return v


def as_csr(A: ArrayLike | sp.spmatrix | sp.sparray) -> SparseMatrix:
    """Return a canonical CSR copy of ``A`` (sorted indices, summed duplicates)."""
    M = sp.csr_matrix(A, dtype=np.float64, copy=True)
    M.sum_duplicates()
    M.sort_indices()
    if not np.all(np.isfinite(M.data)):
        raise ValueError("sparse matrix has nonfinite entries")
    return M


def from_triplets(
    rows: ArrayLike,
    cols: ArrayLike,
    values: ArrayLike,
    shape: tuple[int, int],
) -> SparseMatrix:
    """Build a CSR matrix from coordinate triplets; repeated coordinates are summed."""
    coo = sp.coo_matrix(
        (np.asarray(values, dtype=np.float64), (np.asarray(rows), np.asarray(cols))),
        shape=shape,
    )
    return as_csr(coo)


def spmv(A: SparseMatrix, x: ArrayLike) -> Vector:
    """Sparse matrix-vector product ``A x``."""
    x = np.asarray(x, dtype=np.float64)
    if A.shape[1] != x.shape[0]:
        raise DimensionMismatchError(
            f"cannot apply a {A.shape[0]}x{A.shape[1]} matrix to a vector of length {x.shape[0]}",
        )
    return A @ x


def spmv_transpose(A: SparseMatrix, x: ArrayLike) -> Vector:
    """Transpose product ``A^T x``.

    ``A.T`` of a CSR matrix is a CSC view on the same arrays, so no transposed
    copy is formed.
    """
    x = np.asarray(x, dtype=np.float64)
    if A.shape[0] != x.shape[0]:
        raise DimensionMismatchError(
            f"cannot apply the transpose of a {A.shape[0]}x{A.shape[1]} matrix "
            f"to a vector of length {x.shape[0]}",
        )
    return A.T @ x


def max_asymmetry(A: SparseMatrix) -> float:
    """Largest entry of ``|A - A^T|``."""
    diff = abs(A - A.T)
    return float(diff.max()) if diff.nnz else 0.0


def normalize_columns(vectors: Sequence[Vector]) -> DenseMatrix:
    """Stack vectors as columns scaled to unit Euclidean norm."""
    return np.column_stack([v / np.linalg.norm(v) for v in vectors])


@dataclass(frozen=True, eq=False)
class AffineOperator:
    """The parametric matrix family ``A(theta) = sum_j theta_j A_j``.

    All terms are square with identical size. The union sparsity pattern of
    the terms is computed once and reused by every :meth:`assemble` call.
    """

    terms: tuple[SparseMatrix, ...]

    def __post_init__(self) -> None:
        terms = tuple(as_csr(t) for t in self.terms)
        if not terms:
            raise ArityMismatchError("an affine operator needs at least one term")
        n = terms[0].shape[0]
        for j, term in enumerate(terms):
            if term.shape != (n, n):
                raise DimensionMismatchError(
                    f"term {j} has shape {term.shape}, expected ({n}, {n})",
                )
        object.__setattr__(self, "terms", terms)

    @property
    def n(self) -> int:
        return self.terms[0].shape[0]

    @property
    def J(self) -> int:
        return len(self.terms)

    def check_theta(self, theta: ArrayLike) -> NDArray[np.float64]:
        """Validate a coefficient vector against the number of terms."""
        t = np.asarray(theta, dtype=np.float64).ravel()
        if t.shape[0] != self.J:
            raise ArityMismatchError(f"expected {self.J} coefficients, got {t.shape[0]}")
        if not np.all(np.isfinite(t)):
            raise ParameterDomainError(f"nonfinite coefficients {t.tolist()}")
        return t

    @cached_property
    def _union_pattern(self) -> tuple[SparseMatrix, list[NDArray[np.intp]]]:
        n = self.n
        keys = []
        for term in self.terms:
            rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(term.indptr))
            keys.append(rows * n + term.indices.astype(np.int64))
        union = np.unique(np.concatenate(keys))
        positions = [np.searchsorted(union, k) for k in keys]
        rows = union // n
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        template = sp.csr_matrix(
            (np.zeros(union.size), (union % n).astype(np.int32), indptr),
            shape=(n, n),
        )
        return template, positions

    def assemble(self, theta: ArrayLike) -> SparseMatrix:
        """Return ``sum_j theta_j A_j`` on the union sparsity pattern."""
        t = self.check_theta(theta)
        template, positions = self._union_pattern
        data = np.zeros(template.nnz)
        for coeff, term, pos in zip(t, self.terms, positions, strict=True):
            data[pos] += coeff * term.data
        return sp.csr_matrix(
            (data, template.indices.copy(), template.indptr.copy()),
            shape=template.shape,
        )

    def apply(self, theta: ArrayLike, x: ArrayLike) -> Vector:
        """Matrix-free ``A(theta) x``."""
        t = self.check_theta(theta)
        return sum(coeff * spmv(term, x) for coeff, term in zip(t, self.terms, strict=True))

    def apply_transpose(self, theta: ArrayLike, x: ArrayLike) -> Vector:
        """Matrix-free ``A(theta)^T x``."""
        t = self.check_theta(theta)
        return sum(
            coeff * spmv_transpose(term, x) for coeff, term in zip(t, self.terms, strict=True)
        )

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        """True when every term is symmetric up to ``rtol`` times its largest entry."""
        for term in self.terms:
            scale = float(abs(term).max()) if term.nnz else 0.0
            if max_asymmetry(term) > rtol * max(scale, 1e-300):
                return False
        return True


def assemble_affine(op: AffineOperator, theta: ArrayLike) -> SparseMatrix:
    """Assemble ``A(theta)``; meant for truth solves and factorizations only."""
    return op.assemble(theta)


@dataclass(frozen=True, eq=False)
class ThetaMap:
    """Coefficient functions ``mu -> (theta_1(mu), ..., theta_J(mu))``.

    ``name`` and ``constants`` identify the map in exported manifests; the
    problem registry rebuilds ``func`` from them.
    """

    name: str
    arity: int
    func: Callable[[tuple[float, ...]], Sequence[float]]
    dim: int | None = None
    constants: dict[str, float] = field(default_factory=dict)

    def __call__(self, mu: ArrayLike) -> NDArray[np.float64]:
        point = tuple(float(v) for v in np.atleast_1d(np.asarray(mu, dtype=np.float64)))
        if self.dim is not None and len(point) != self.dim:
            raise ParameterDomainError(
                f"{self.name} expects parameters of dimension {self.dim}, got {point}",
            )
        theta = np.asarray(self.func(point), dtype=np.float64)
        if theta.shape != (self.arity,):
            raise ArityMismatchError(
                f"{self.name} produced {theta.size} coefficients, expected {self.arity}",
            )
        if not np.all(np.isfinite(theta)):
            raise ParameterDomainError(f"{self.name} is not finite at {point}")
        return theta


@dataclass(frozen=True, eq=False)
class SpdWeight:
    """Weight of the inner product ``(x, y)_M = (M x, y)``; ``None`` means identity."""

    matrix: SparseMatrix | None = None

    @classmethod
    def identity(cls) -> SpdWeight:
        return cls()

    @classmethod
    def from_matrix(
        cls,
        M: ArrayLike | sp.spmatrix,
        check: bool = True,
        seed: int = 0,
    ) -> SpdWeight:
        """Wrap an SPD matrix, checking symmetry and positivity on random vectors."""
        M = as_csr(M)
        if M.shape[0] != M.shape[1]:
            raise DimensionMismatchError(f"weight matrix must be square, got {M.shape}")
        if check:
            scale = float(abs(M).max()) if M.nnz else 0.0
            if max_asymmetry(M) > 1e-12 * scale:
                raise ValueError("weight matrix is not symmetric")
            rng = np.random.default_rng(seed)
            for _ in range(5):
                x = rng.standard_normal(M.shape[0])
                if float(x @ (M @ x)) <= 0.0:
                    raise NotPositiveDefiniteError("weight matrix is not positive-definite")
        return cls(M)

    @property
    def is_identity(self) -> bool:
        return self.matrix is None

    def apply(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=np.float64)
        if self.matrix is None:
            return x
        if self.matrix.shape[1] != x.shape[0]:
            raise DimensionMismatchError(
                f"weight of size {self.matrix.shape[0]} applied to length {x.shape[0]}",
            )
        return self.matrix @ x

    def inner(self, x: ArrayLike, y: ArrayLike) -> float:
        return m_inner(self, x, y)

    def norm(self, x: ArrayLike) -> float:
        return float(np.sqrt(max(m_inner(self, x, x), 0.0)))


def m_inner(M: SpdWeight, x: ArrayLike, y: ArrayLike) -> float:
    """Weighted inner product ``(M x, y)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"vectors of shapes {x.shape} and {y.shape}")
    return float(np.dot(M.apply(x), y))


def gram_schmidt_m(
    cols: Sequence[ArrayLike],
    M: SpdWeight | None = None,
    drop_tol: float | None = None,
) -> tuple[DenseMatrix, int]:
    """M-orthonormalize ``cols`` with modified Gram-Schmidt plus one reorthogonalization.

    A candidate whose M-norm after projection is below ``drop_tol`` times its
    original M-norm is dropped. Returns the ``n x rank`` basis and the rank.
    """
    weight = M if M is not None else SpdWeight.identity()
    tol = DROP_TOL if drop_tol is None else drop_tol
    vectors = [np.asarray(c, dtype=np.float64) for c in cols]
    if not vectors:
        raise DimensionMismatchError("gram_schmidt_m needs at least one vector")
    n = vectors[0].shape[0]
    if any(v.shape != (n,) for v in vectors):
        raise DimensionMismatchError("all vectors must have the same length")

    basis: list[Vector] = []
    weighted: list[Vector] = []
    for index, v in enumerate(vectors):
        w = v.copy()
        norm0 = weight.norm(w)
        if norm0 == 0.0:
            continue
        for _ in range(2):
            for q, mq in zip(basis, weighted, strict=True):
                w -= float(mq @ w) * q
        norm = weight.norm(w)
        if norm <= tol * norm0:
            logger.debug("dropping dependent vector %d (ratio %.3e)", index, norm / norm0)
            continue
        q = w / norm
        basis.append(q)
        weighted.append(weight.apply(q))

    if not basis:
        return np.zeros((n, 0)), 0
    return np.column_stack(basis), len(basis)


def condition_estimate(A: ArrayLike) -> float:
    """2-norm condition number of a small dense matrix (``inf`` when singular)."""
    with np.errstate(all="ignore"):
        try:
            return float(np.linalg.cond(np.asarray(A, dtype=np.float64)))
        except np.linalg.LinAlgError:
            return float("inf")


def dense_solve(
    A: ArrayLike,
    b: ArrayLike,
    refine: bool = True,
    theta: Sequence[float] | None = None,
) -> Vector:
    """Solve a small dense system by LU with partial pivoting and one refinement pass.

    Raises:
        SingularReducedSystemError: If a pivot falls below
            ``SINGULAR_PIVOT_TOL`` times the largest entry of ``A``.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"dense_solve needs a square matrix, got {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise DimensionMismatchError(
            f"right-hand side of length {b.shape[0]} for a {A.shape[0]}x{A.shape[0]} system",
        )
    if A.shape[0] == 0:
        return np.zeros(0)
    scale = float(np.abs(A).max())
    if scale == 0.0 or not np.isfinite(scale):
        raise SingularReducedSystemError("reduced matrix is zero or nonfinite", theta, float("inf"))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A)
    smallest = float(np.abs(np.diag(lu)).min())
    if smallest < SINGULAR_PIVOT_TOL * scale:
        cond = condition_estimate(A)
        raise SingularReducedSystemError(
            f"reduced system is singular to working precision "
            f"(pivot {smallest:.3e}, condition {cond:.3e})",
            theta,
            cond,
        )
    x = scipy.linalg.lu_solve((lu, piv), b)
    if refine:
        x = x + scipy.linalg.lu_solve((lu, piv), b - A @ x)
    return x
