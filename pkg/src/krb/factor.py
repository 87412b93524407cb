"""Sparse direct factorizations, exact preconditioners and truth solves.

Orderings are reverse Cuthill-McKee. Symmetric positive-definite matrices are
factorized with banded LAPACK Cholesky on the reordered matrix, everything
else with SuperLU (partial pivoting, no further column ordering). A matrix
``A`` reordered by a :class:`Permutation` ``p`` is ``A[p.perm][:, p.perm]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.csgraph
import scipy.sparse.linalg

from krb.exceptions import (
    DimensionMismatchError,
    NotPositiveDefiniteError,
    SingularMatrixError,
)
from krb.linalg import AffineOperator, SparseMatrix, as_csr, max_asymmetry

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

FactorKind = Literal["cholesky", "lu"]


@dataclass(frozen=True, eq=False)
class Permutation:
    """A bijection of ``0..n-1`` together with its inverse."""

    perm: NDArray[np.intp]
    inverse: NDArray[np.intp]

    @classmethod
    def from_array(cls, perm: ArrayLike) -> Permutation:
        p = np.asarray(perm, dtype=np.intp)
        n = p.shape[0]
        if not np.array_equal(np.sort(p), np.arange(n)):
            raise ValueError("not a permutation of 0..n-1")
        inverse = np.empty(n, dtype=np.intp)
        inverse[p] = np.arange(n, dtype=np.intp)
        return cls(p, inverse)

    @classmethod
    def identity(cls, n: int) -> Permutation:
        return cls(np.arange(n, dtype=np.intp), np.arange(n, dtype=np.intp))

    @property
    def n(self) -> int:
        return self.perm.shape[0]

    def apply_matrix(self, A: SparseMatrix) -> SparseMatrix:
        """Symmetric reordering ``A[perm][:, perm]``."""
        return as_csr(A[self.perm][:, self.perm])


def bandwidth(A: SparseMatrix) -> int:
    """Largest ``|i - j|`` over the stored entries of ``A``."""
    coo = sp.coo_matrix(A)
    if coo.nnz == 0:
        return 0
    return int(np.abs(coo.row.astype(np.int64) - coo.col.astype(np.int64)).max())


def _symmetric_pattern(A: SparseMatrix) -> SparseMatrix:
    A = as_csr(A)
    S = sp.csr_matrix((np.ones(A.nnz), A.indices, A.indptr), shape=A.shape)
    return as_csr(S + S.T)


def rcm_order(A: SparseMatrix) -> Permutation:
    """Reverse Cuthill-McKee ordering of the symmetrized pattern of ``A``.

    The natural ordering is returned when RCM would not reduce the bandwidth,
    so the reordered bandwidth never exceeds the original one.
    """
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"rcm_order needs a square matrix, got {A.shape}")
    S = _symmetric_pattern(A)
    p = Permutation.from_array(
        scipy.sparse.csgraph.reverse_cuthill_mckee(S, symmetric_mode=True),
    )
    if bandwidth(p.apply_matrix(S)) > bandwidth(S):
        return Permutation.identity(A.shape[0])
    return p


@dataclass(frozen=True, eq=False)
class SymbolicFactorization:
    """Ordering phase of a factorization; reusable for every matrix with the same pattern."""

    kind: FactorKind
    permutation: Permutation
    bandwidth: int

    @property
    def n(self) -> int:
        return self.permutation.n


@dataclass(frozen=True, eq=False)
class Factorization:
    """Numeric factors of ``A`` reordered by ``permutation``.

    Cholesky factors hold the lower band of ``L`` in LAPACK lower banded form;
    LU factors hold the SuperLU object of the reordered matrix.
    """

    kind: FactorKind
    permutation: Permutation
    banded: NDArray[np.float64] | None = None
    superlu: scipy.sparse.linalg.SuperLU | None = None

    @property
    def n(self) -> int:
        return self.permutation.n

    @property
    def lower(self) -> SparseMatrix:
        if self.kind == "cholesky":
            bands = self.banded.shape[0]
            L = sp.dia_matrix((self.banded, -np.arange(bands)), shape=(self.n, self.n))
            return as_csr(L)
        return as_csr(self.superlu.L)

    @property
    def upper(self) -> SparseMatrix | None:
        return as_csr(self.superlu.U) if self.kind == "lu" else None

    @property
    def pivots(self) -> NDArray[np.intp] | None:
        return np.asarray(self.superlu.perm_r) if self.kind == "lu" else None

    def solve(self, b: ArrayLike) -> NDArray[np.float64]:
        """Solve ``A x = b``; ``b`` may hold several right-hand sides as columns."""
        return self._solve(b, transpose=False)

    def solve_transpose(self, b: ArrayLike) -> NDArray[np.float64]:
        """Solve ``A^T x = b``."""
        return self._solve(b, transpose=True)

    def _solve(self, b: ArrayLike, transpose: bool) -> NDArray[np.float64]:
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise DimensionMismatchError(
                f"right-hand side of length {b.shape[0]} for a system of size {self.n}",
            )
        y = b[self.permutation.perm]
        if self.kind == "cholesky":
            y = scipy.linalg.cho_solve_banded((self.banded, True), y, check_finite=False)
        else:
            y = self.superlu.solve(np.ascontiguousarray(y), trans="T" if transpose else "N")
        x = np.empty_like(y)
        x[self.permutation.perm] = y
        return x


def symbolic_factor(A: SparseMatrix, kind: FactorKind) -> SymbolicFactorization:
    """Compute the ordering of ``A`` for a later :func:`numeric_factor`."""
    p = rcm_order(A)
    return SymbolicFactorization(kind, p, bandwidth(p.apply_matrix(_symmetric_pattern(A))))


def numeric_factor(symbolic: SymbolicFactorization, A: SparseMatrix) -> Factorization:
    """Factorize ``A`` with the ordering of ``symbolic``.

    Raises:
        NotPositiveDefiniteError: If a Cholesky pivot is not positive.
        SingularMatrixError: If LU finds an exactly singular column.
    """
    A = as_csr(A)
    if A.shape != (symbolic.n, symbolic.n):
        raise DimensionMismatchError(
            f"matrix of shape {A.shape} does not fit an ordering of size {symbolic.n}",
        )
    Ap = symbolic.permutation.apply_matrix(A)

    if symbolic.kind == "cholesky":
        scale = float(abs(A).max()) if A.nnz else 0.0
        if max_asymmetry(A) > 1e-12 * scale:
            raise NotPositiveDefiniteError("Cholesky needs a symmetric matrix")
        bw = bandwidth(Ap)
        n = symbolic.n
        ab = np.zeros((bw + 1, n))
        for k in range(bw + 1):
            ab[k, : n - k] = Ap.diagonal(-k)
        try:
            cb = scipy.linalg.cholesky_banded(ab, lower=True, check_finite=False)
        except np.linalg.LinAlgError as e:
            raise NotPositiveDefiniteError(f"matrix is not positive-definite: {e}") from e
        return Factorization("cholesky", symbolic.permutation, banded=cb)

    try:
        lu = scipy.sparse.linalg.splu(Ap.tocsc(), permc_spec="NATURAL")
    except RuntimeError as e:
        raise SingularMatrixError(f"sparse LU failed: {e}") from e
    return Factorization("lu", symbolic.permutation, superlu=lu)


def chol_factor(A: SparseMatrix) -> Factorization:
    """Cholesky factorization ``P A P^T = L L^T`` after RCM ordering."""
    return numeric_factor(symbolic_factor(A, "cholesky"), A)


def lu_factor(A: SparseMatrix) -> Factorization:
    """LU factorization with partial pivoting after RCM ordering."""
    return numeric_factor(symbolic_factor(A, "lu"), A)


@dataclass(frozen=True, eq=False)
class LinearOperatorHandle:
    """An ``n x n`` linear map given by its action and the action of its adjoint.

    Both callables accept a vector or a 2-D array of column vectors.
    """

    dim: int
    apply_fn: Callable[[NDArray[np.float64]], NDArray[np.float64]]
    adjoint_fn: Callable[[NDArray[np.float64]], NDArray[np.float64]]
    self_adjoint: bool = False
    name: str = ""

    @classmethod
    def identity(cls, n: int) -> LinearOperatorHandle:
        return cls(n, np.copy, np.copy, self_adjoint=True, name="identity")

    @classmethod
    def from_factorization(cls, fac: Factorization, name: str = "") -> LinearOperatorHandle:
        """The inverse of the factorized matrix."""
        return cls(
            fac.n,
            fac.solve,
            fac.solve_transpose,
            self_adjoint=fac.kind == "cholesky",
            name=name,
        )

    def apply(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.apply_fn(self._check(x))

    def apply_adjoint(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.adjoint_fn(self._check(x))

    def __call__(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.apply(x)

    def _check(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"operator of size {self.dim} applied to an array of shape {x.shape}",
            )
        return x


def make_exact_preconditioner(
    op: AffineOperator,
    theta0: ArrayLike,
    spd_hint: bool,
) -> LinearOperatorHandle:
    """``B = A(theta0)^-1`` through a single stored factorization.

    Args:
        op (AffineOperator): The parametric operator.
        theta0 (ArrayLike): Coefficients of the reference parameter.
        spd_hint (bool): Use Cholesky (``True``) or LU (``False``).

    Returns:
        LinearOperatorHandle: Applies ``A(theta0)^-1`` and ``A(theta0)^-T``.
    """
    A0 = op.assemble(theta0)
    fac = chol_factor(A0) if spd_hint else lu_factor(A0)
    logger.info(
        "factorized A(theta0) of size %d with %s (bandwidth %d)",
        op.n,
        fac.kind,
        bandwidth(fac.permutation.apply_matrix(A0)),
    )
    return LinearOperatorHandle.from_factorization(fac, name=f"exact-{fac.kind}")


def make_block_diagonal_preconditioner(
    op: AffineOperator,
    theta0: ArrayLike,
    blocks: Sequence[ArrayLike],
    spd_hint: bool,
) -> LinearOperatorHandle:
    """Inverse of the block diagonal of ``A(theta0)`` for a partition of the unknowns.

    ``blocks`` must partition ``0..n-1``; each diagonal block is factorized once.
    """
    A0 = op.assemble(theta0)
    index_sets = [np.asarray(b, dtype=np.intp) for b in blocks]
    covered = np.sort(np.concatenate(index_sets)) if index_sets else np.zeros(0, dtype=np.intp)
    if not np.array_equal(covered, np.arange(op.n)):
        raise DimensionMismatchError("blocks must partition the unknowns")

    factors = []
    for idx in index_sets:
        sub = as_csr(A0[idx][:, idx])
        factors.append(chol_factor(sub) if spd_hint else lu_factor(sub))
    logger.info("factorized %d diagonal blocks of A(theta0)", len(factors))

    def apply(x: NDArray[np.float64]) -> NDArray[np.float64]:
        out = np.empty_like(x)
        for idx, fac in zip(index_sets, factors, strict=True):
            out[idx] = fac.solve(x[idx])
        return out

    def apply_adjoint(x: NDArray[np.float64]) -> NDArray[np.float64]:
        out = np.empty_like(x)
        for idx, fac in zip(index_sets, factors, strict=True):
            out[idx] = fac.solve_transpose(x[idx])
        return out

    return LinearOperatorHandle(
        op.n,
        apply,
        apply_adjoint,
        self_adjoint=spd_hint,
        name="block-diagonal",
    )


class TruthSolver:
    """Direct solves of ``A(theta) u = f`` sharing one ordering across parameters."""

    def __init__(self, op: AffineOperator, spd_hint: bool) -> None:
        self._op = op
        pattern = op.assemble(np.ones(op.J))
        self._symbolic = symbolic_factor(pattern, "cholesky" if spd_hint else "lu")

    def factor(self, theta: ArrayLike) -> Factorization:
        return numeric_factor(self._symbolic, self._op.assemble(theta))

    def solve(self, theta: ArrayLike, f: ArrayLike) -> NDArray[np.float64]:
        return self.factor(theta).solve(f)


def truth_solve(
    op: AffineOperator,
    theta: ArrayLike,
    f: ArrayLike,
    spd_hint: bool,
) -> NDArray[np.float64]:
    """One-off direct solve of ``A(theta) u = f``."""
    A = op.assemble(theta)
    fac = chol_factor(A) if spd_hint else lu_factor(A)
    return fac.solve(f)
