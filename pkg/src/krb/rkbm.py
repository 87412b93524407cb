"""Offline builders of reduced Krylov basis models.

Each builder runs a Krylov method on ``B A(theta_l) u = B f`` at one or more
coefficient vectors ``theta_l``, turns the harvested vectors into a basis and
hands it to the reductor of the matching projection variant.

=========  =========  ===========================  ===============
method     Krylov     harvested vectors            projection
=========  =========  ===========================  ===============
rcgbm      PCG        directions ``p_k``           Galerkin
rkbm1      GMRES      ``z_k = B(f - A u_k)``       least-squares
rkbm2      BiCG       ``p_k`` and ``p*_k``         Petrov-Galerkin
mrcgbm     PCG        ``p_{l,k}`` over all ``l``   Galerkin
mrkbm1     GMRES      ``z_{l,k}`` over all ``l``   least-squares
mrkbm2     BiCG       ``z_{l,k}``, ``z*_{l,k}``    Petrov-Galerkin
=========  =========  ===========================  ===============
"""

from __future__ import annotations

import logging
from functools import partial
from typing import TYPE_CHECKING, Literal

import numpy as np

from krb.config import DROP_TOL
from krb.exceptions import DimensionMismatchError, EmptyModelError, NumericalBreakdownError
from krb.krylov import KrylovTrace, bicg_run, gmres_run, pcg_run
from krb.linalg import SpdWeight, as_vector, gram_schmidt_m, normalize_columns
from krb.models import empty_meta
from krb.reductors import GalerkinReductor, LeastSquaresReductor, PetrovGalerkinReductor

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from numpy.typing import ArrayLike

    from krb.factor import LinearOperatorHandle
    from krb.linalg import AffineOperator, DenseMatrix, Vector
    from krb.models import BasisMeta, ReducedModel

logger = logging.getLogger(__name__)

MultiMode = Literal["mrcgbm", "mrkbm1", "mrkbm2"]


def _check_inputs(op: AffineOperator, f: ArrayLike, B: LinearOperatorHandle, m: int) -> Vector:
    f = as_vector(f, "f")
    if f.shape[0] != op.n or B.dim != op.n:
        raise DimensionMismatchError(
            f"operator of size {op.n}, right-hand side of length {f.shape[0]}, "
            f"preconditioner of size {B.dim}",
        )
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    return f


def _run(runner: Callable[[], KrylovTrace]) -> KrylovTrace:
    """Run a Krylov method, keeping the partial trace of a nonfinite breakdown."""
    try:
        return runner()
    except NumericalBreakdownError as e:
        logger.warning("%s; keeping the vectors harvested so far", e)
        return e.trace


def _record(meta: BasisMeta, theta: ArrayLike, m: int, harvested: int, trace: KrylovTrace) -> None:
    meta["instances"].append([float(t) for t in np.asarray(theta).ravel()])
    meta["m"].append(m)
    meta["harvested"].append(harvested)
    meta["stop_reasons"].append(trace.stop_reason)
    if harvested < m:
        note = f"instance {len(meta['m'])}: {harvested} of {m} vectors ({trace.stop_reason})"
        meta["notes"].append(note)
        logger.warning("basis shrinks: %s", note)


def _single_basis(
    vectors: Sequence[Vector],
    orthonormalize: bool,
    M: SpdWeight | None,
) -> DenseMatrix:
    if not vectors:
        raise EmptyModelError("the Krylov run produced no basis vector (is f zero?)")
    if orthonormalize:
        Q, _ = gram_schmidt_m(vectors, M)
        return Q
    return normalize_columns(vectors)


def _pcg(
    op: AffineOperator,
    f: Vector,
    B: LinearOperatorHandle,
    theta: ArrayLike,
    m: int,
) -> KrylovTrace:
    A = partial(op.apply, op.check_theta(theta))
    return _run(lambda: pcg_run(A, B.apply, f, m))


def _gmres(
    op: AffineOperator,
    f: Vector,
    B: LinearOperatorHandle,
    M: SpdWeight | None,
    theta: ArrayLike,
    m: int,
) -> KrylovTrace:
    A = partial(op.apply, op.check_theta(theta))
    return _run(lambda: gmres_run(A, B.apply, f, m, M))


def _bicg(
    op: AffineOperator,
    f: Vector,
    B: LinearOperatorHandle,
    theta: ArrayLike,
    r0_star: ArrayLike | None,
    m: int,
) -> KrylovTrace:
    t = op.check_theta(theta)
    A = partial(op.apply, t)
    At = partial(op.apply_transpose, t)
    return _run(lambda: bicg_run(A, At, B.apply, B.apply_adjoint, f, r0_star, m))


def build_rcgbm(
    op: AffineOperator,
    f: ArrayLike,
    B: LinearOperatorHandle,
    theta1: ArrayLike,
    m: int,
    orthonormalize: bool = False,
) -> ReducedModel:
    """Galerkin model on the PCG directions ``p_0..p_{m-1}`` harvested at ``theta1``.

    Args:
        op (AffineOperator): Affine operator with SPD ``A(theta1)``.
        f (ArrayLike): Right-hand side.
        B (LinearOperatorHandle): SPD preconditioner, usually ``A(theta0)^-1``.
        theta1 (ArrayLike): Coefficients the PCG run is performed at.
        m (int): Requested basis size.
        orthonormalize (bool): Orthonormalize the directions instead of scaling
            each to unit norm.

    Returns:
        ReducedModel: A Galerkin model of dimension ``<= m``.
    """
    f = _check_inputs(op, f, B, m)
    trace = _pcg(op, f, B, theta1, m)
    meta = empty_meta("rcgbm")
    meta["orthonormalized"] = orthonormalize
    _record(meta, theta1, m, len(trace.directions), trace)
    P = _single_basis(trace.directions, orthonormalize, None)
    logger.info("rcgbm basis of dimension %d (%s)", P.shape[1], trace.stop_reason)
    return GalerkinReductor(op, f).reduce(P, meta)


def build_rkbm1(
    op: AffineOperator,
    f: ArrayLike,
    B: LinearOperatorHandle,
    M: SpdWeight | None,
    theta1: ArrayLike,
    m: int,
    orthonormalize: bool = False,
) -> ReducedModel:
    """Least-squares model on ``z_j = B(f - A(theta1) u_j)`` from M-norm GMRES."""
    f = _check_inputs(op, f, B, m)
    trace = _gmres(op, f, B, M, theta1, m)
    meta = empty_meta("rkbm1")
    meta["orthonormalized"] = orthonormalize
    _record(meta, theta1, m, len(trace.z), trace)
    P = _single_basis(trace.z, orthonormalize, M)
    logger.info("rkbm1 basis of dimension %d (%s)", P.shape[1], trace.stop_reason)
    return LeastSquaresReductor(op, f, B, M).reduce(P, meta)


def build_rkbm2(
    op: AffineOperator,
    f: ArrayLike,
    B: LinearOperatorHandle,
    theta1: ArrayLike,
    r0_star: ArrayLike | None,
    m: int,
    orthonormalize: bool = False,
) -> ReducedModel:
    """Petrov-Galerkin model on the BiCG directions ``p_k`` (trial) and ``p*_k`` (test).

    ``r0_star=None`` uses ``f`` as shadow residual.
    """
    f = _check_inputs(op, f, B, m)
    trace = _bicg(op, f, B, theta1, r0_star, m)
    meta = empty_meta("rkbm2")
    meta["orthonormalized"] = orthonormalize
    _record(meta, theta1, m, len(trace.directions), trace)
    P = _single_basis(trace.directions, orthonormalize, None)
    Q = _single_basis(trace.dual_directions, orthonormalize, None)
    if P.shape[1] != Q.shape[1]:
        meta["notes"].append(f"trial rank {P.shape[1]} and test rank {Q.shape[1]} paired")
        P, Q = align_bases(P, Q)
    logger.info("rkbm2 bases of dimension %d (%s)", P.shape[1], trace.stop_reason)
    return PetrovGalerkinReductor(op, f).reduce(P, Q, meta)


def align_bases(P: DenseMatrix, Q: DenseMatrix) -> tuple[DenseMatrix, DenseMatrix]:
    """Pair trial and test bases of different rank by the singular vectors of ``Q^T P``.

    Both results have ``min(rank P, rank Q)`` columns: the directions of each
    span most aligned with the other span, so a direction both spans share is
    never discarded. Columns keep their orthonormality.
    """
    k = min(P.shape[1], Q.shape[1])
    U, _, Vt = np.linalg.svd(Q.T @ P, full_matrices=False)
    return P @ Vt[:k].T, Q @ U[:, :k]


def build_multi(
    op: AffineOperator,
    f: ArrayLike,
    B: LinearOperatorHandle,
    M: SpdWeight | None,
    theta_list: Sequence[ArrayLike],
    m: int,
    mode: MultiMode,
    drop_tol: float | None = None,
    r0_star: ArrayLike | None = None,
) -> ReducedModel:
    """Model on the sum of the Krylov spaces harvested at every ``theta_l``.

    The ``L * m`` spanning vectors are generally dependent; an M-orthonormal
    basis is extracted with :func:`gram_schmidt_m`. For ``mrkbm2`` the trial
    and test unions are orthonormalized separately; when their ranks differ
    they are paired by :func:`align_bases`.

    Raises:
        EmptyModelError: If no vector survives (e.g. ``f = 0``).
    """
    f = _check_inputs(op, f, B, m)
    if not theta_list:
        raise ValueError("build_multi needs at least one parameter instance")
    tol = DROP_TOL if drop_tol is None else drop_tol
    meta = empty_meta(mode)
    meta["drop_tol"] = tol
    meta["orthonormalized"] = True

    primal: list[Vector] = []
    dual: list[Vector] = []
    for theta in theta_list:
        if mode == "mrcgbm":
            trace = _pcg(op, f, B, theta, m)
            vectors = trace.directions
        elif mode == "mrkbm1":
            trace = _gmres(op, f, B, M, theta, m)
            vectors = trace.z
        elif mode == "mrkbm2":
            trace = _bicg(op, f, B, theta, r0_star, m)
            vectors = trace.z
            dual.extend(trace.z_star)
        else:
            raise ValueError(f"unknown multi-instance mode {mode!r}")
        primal.extend(vectors)
        _record(meta, theta, m, len(vectors), trace)

    if not primal:
        raise EmptyModelError("no Krylov vector was harvested (is f zero?)")
    weight = M if M is not None else SpdWeight.identity()
    P, rank = gram_schmidt_m(primal, weight, tol)
    if rank == 0:
        raise EmptyModelError("the harvested vectors have rank 0")
    logger.info("%s: %d spanning vectors, rank %d", mode, len(primal), rank)

    if mode == "mrcgbm":
        return GalerkinReductor(op, f).reduce(P, meta)
    if mode == "mrkbm1":
        return LeastSquaresReductor(op, f, B, M).reduce(P, meta)

    Q, dual_rank = gram_schmidt_m(dual, weight, tol)
    if dual_rank != rank:
        if dual_rank == 0:
            raise EmptyModelError("the dual vectors have rank 0")
        common = min(rank, dual_rank)
        meta["notes"].append(
            f"trial rank {rank} and test rank {dual_rank} paired to {common}",
        )
        logger.warning("mrkbm2 trial rank %d differs from test rank %d", rank, dual_rank)
        P, Q = align_bases(P, Q)
    return PetrovGalerkinReductor(op, f).reduce(P, Q, meta)
