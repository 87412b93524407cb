"""Error norms and estimates of the constants in the convergence bounds.

``kappa`` is the condition number of ``B A(theta)`` estimated from the
Lanczos tridiagonal hidden in the PCG coefficients. ``gamma`` and
``Gamma_cap`` bound the field of values of ``B A(theta)`` in the M-inner
product from inside and outside. They are sampled, so they are estimates:
tests compare against dense oracles instead.
"""

from __future__ import annotations

import logging
import math
from functools import partial
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg

from krb.config import DENSE_LIMIT, FOV_SAMPLES, LANCZOS_STEPS
from krb.exceptions import DimensionMismatchError, KrbError
from krb.factor import chol_factor
from krb.krylov import pcg_run
from krb.linalg import SpdWeight, as_vector, gram_schmidt_m
from krb.models import Diagnostics, QuasiOptimality
from krb.online import online_solve

if TYPE_CHECKING:
    from collections.abc import Mapping

    from numpy.typing import ArrayLike

    from krb.factor import LinearOperatorHandle
    from krb.linalg import AffineOperator, DenseMatrix, SparseMatrix, Vector
    from krb.models import ReducedModel

logger = logging.getLogger(__name__)


def lanczos_condition(
    op: AffineOperator,
    B: LinearOperatorHandle,
    f: ArrayLike,
    theta: ArrayLike,
    steps: int = LANCZOS_STEPS,
) -> float | None:
    """Condition number of ``B A(theta)`` from a ``steps``-step PCG/Lanczos run.

    Returns ``None`` when PCG breaks down (``A(theta)`` or ``B`` not SPD).
    """
    t = op.check_theta(theta)
    trace = pcg_run(partial(op.apply, t), B.apply, f, steps + 1)
    if trace.stop_reason == "breakdown" or not trace.alpha:
        return None
    alpha = np.asarray(trace.alpha)
    beta = np.asarray(trace.beta)
    k = alpha.size
    if np.any(alpha <= 0.0) or np.any(beta[: k - 1] < 0.0):
        return None
    if k == 1:
        return 1.0
    diag = 1.0 / alpha
    diag[1:] += beta[: k - 1] / alpha[: k - 1]
    off = np.sqrt(beta[: k - 1]) / alpha[: k - 1]
    eigenvalues = scipy.linalg.eigvalsh_tridiagonal(diag, off)
    lo, hi = float(eigenvalues[0]), float(eigenvalues[-1])
    if lo <= 0.0:
        return None
    return max(hi / lo, 1.0)


def field_of_values(
    op: AffineOperator,
    B: LinearOperatorHandle,
    M: SpdWeight | None,
    theta: ArrayLike,
    samples: int = FOV_SAMPLES,
    power_steps: int = LANCZOS_STEPS,
    seed: int = 0,
) -> tuple[float, float]:
    """Sampled ``gamma = inf (BAv, v)_M / (v, v)_M`` and ``Gamma = ||BA||_M``.

    ``gamma`` is the smallest Rayleigh quotient over random vectors.
    ``Gamma`` is the larger of the sampled ratios ``||BAv||_M / ||v||_M`` and a
    power iteration on ``(BA)^* BA``, with the M-adjoint
    ``(BA)^* = M^-1 A^T B^T M``.
    """
    weight = M if M is not None else SpdWeight.identity()
    t = op.check_theta(theta)
    rng = np.random.default_rng(seed)

    def T(v: Vector) -> Vector:
        return B.apply(op.apply(t, v))

    gamma = math.inf
    big = 0.0
    for _ in range(samples):
        v = rng.standard_normal(op.n)
        v /= weight.norm(v)
        Tv = T(v)
        gamma = min(gamma, weight.inner(Tv, v))
        big = max(big, weight.norm(Tv))

    M_solve = chol_factor(weight.matrix).solve if weight.matrix is not None else np.copy

    def T_adjoint(v: Vector) -> Vector:
        return M_solve(op.apply_transpose(t, B.apply_adjoint(weight.apply(v))))

    v = rng.standard_normal(op.n)
    v /= weight.norm(v)
    for _ in range(power_steps):
        w = T_adjoint(T(v))
        norm = weight.norm(w)
        if norm == 0.0:
            break
        v = w / norm
    big = max(big, weight.norm(T(v)))
    return float(gamma), float(big)


def bound_pcg(kappa: float, m: int) -> float:
    """``2 ((sqrt(kappa) - 1) / (sqrt(kappa) + 1))^m``."""
    root = math.sqrt(kappa)
    return 2.0 * ((root - 1.0) / (root + 1.0)) ** m


def bound_gmres(gamma: float, Gamma: float, m: int) -> float | None:
    """``(1 - gamma^2 / Gamma^2)^(m/2)``; ``None`` unless ``0 < gamma``."""
    if gamma <= 0.0 or Gamma <= 0.0:
        return None
    return max(1.0 - (gamma / Gamma) ** 2, 0.0) ** (m / 2)


def _relative(err: Vector, truth: Vector, N: SparseMatrix) -> float | None:
    num = float(err @ (N @ err))
    den = float(truth @ (N @ truth))
    if num < 0.0 or den <= 0.0:
        return None
    return math.sqrt(num / den)


def error_norms(
    lifted: Vector,
    truth: Vector,
    op: AffineOperator,
    theta: ArrayLike,
    f: ArrayLike,
    B: LinearOperatorHandle | None = None,
    M: SpdWeight | None = None,
    norms: Mapping[str, SparseMatrix] | None = None,
) -> dict[str, float | None]:
    """Relative errors of ``lifted`` against ``truth``.

    ``energy`` uses ``A(theta)`` (``None`` if it is not positive on the
    error), every entry of ``norms`` its own matrix and ``m_residual`` the
    preconditioned residual ``||B A (u - u_hat)||_M / ||B f||_M``.
    """
    truth = as_vector(truth, "truth")
    err = truth - np.asarray(lifted, dtype=np.float64)
    out: dict[str, float | None] = {"energy": _relative(err, truth, op.assemble(theta))}
    for name, N in (norms or {}).items():
        out[name] = _relative(err, truth, N)
    if B is not None:
        weight = M if M is not None else SpdWeight.identity()
        Bf_norm = weight.norm(B.apply(as_vector(f, "f")))
        out["m_residual"] = (
            weight.norm(B.apply(op.apply(theta, err))) / Bf_norm if Bf_norm > 0.0 else None
        )
    return out


def diagnostics_for(
    model: ReducedModel,
    op: AffineOperator,
    f: ArrayLike,
    B: LinearOperatorHandle,
    M: SpdWeight | None,
    theta: ArrayLike,
    truth: ArrayLike,
    norm: str = "energy",
    norms: Mapping[str, SparseMatrix] | None = None,
    spd: bool | None = None,
) -> Diagnostics:
    """Errors of the reduced solution at ``theta`` and the constants of its bounds.

    Args:
        model (ReducedModel): The reduced model.
        op (AffineOperator): The parametric operator.
        f (ArrayLike): Right-hand side.
        B (LinearOperatorHandle): Preconditioner used to build the model.
        M (SpdWeight | None): Weight of the residual norm (identity if ``None``).
        theta (ArrayLike): Coefficients of the evaluated parameter.
        truth (ArrayLike): Direct solution at ``theta``.
        norm (str): Norm whose absolute error is reported as ``sigma_m``.
        norms (Mapping[str, SparseMatrix] | None): Extra norm matrices, e.g.
            ``{"h1_semi": ...}``.
        spd (bool | None): Whether ``A(theta)`` is SPD; detected from the
            symmetry of the terms when ``None``.

    Returns:
        Diagnostics: ``kappa`` is only estimated in the SPD case; ``bound_gmres``
            is ``None`` when the sampled ``gamma`` is not positive.
    """
    t = op.check_theta(theta)
    f = as_vector(f, "f")
    truth = as_vector(truth, "truth")
    _, lifted = online_solve(model, t)
    rel = error_norms(lifted, truth, op, t, f, B, M, norms)

    err = truth - lifted
    if norm == "energy":
        value = float(err @ op.apply(t, err))
        sigma = math.sqrt(value) if value >= 0.0 else None
    elif norm == "m_residual":
        weight = M if M is not None else SpdWeight.identity()
        sigma = weight.norm(B.apply(op.apply(t, err)))
    elif norms and norm in norms:
        value = float(err @ (norms[norm] @ err))
        sigma = math.sqrt(max(value, 0.0))
    else:
        raise KrbError(f"no matrix for the {norm!r} norm")

    if spd is None:
        spd = op.is_symmetric() and B.self_adjoint
    kappa = lanczos_condition(op, B, f, t) if spd else None
    gamma, Gamma = field_of_values(op, B, M, t)
    m = model.m
    diagnostics = Diagnostics(
        kappa=kappa,
        gamma=gamma,
        Gamma_cap=Gamma,
        sigma_m=sigma,
        bound_pcg=bound_pcg(kappa, m) if kappa is not None else None,
        bound_gmres=bound_gmres(gamma, Gamma, m),
        rel_error=rel,
    )
    if gamma <= 0.0:
        logger.info("sampled gamma %.3e is not positive; GMRES bound not applicable", gamma)
    return diagnostics


def best_approximation(P: DenseMatrix, u: ArrayLike, M: SpdWeight | None = None) -> float:
    """``min_{v in col(P)} ||u - v||_M`` via the M-orthogonal projection."""
    weight = M if M is not None else SpdWeight.identity()
    u = as_vector(u, "u")
    Q, rank = gram_schmidt_m(list(np.asarray(P).T), weight)
    if rank == 0:
        return weight.norm(u)
    coeffs = Q.T @ weight.apply(u)
    return weight.norm(u - Q @ coeffs)


def _dense(A: SparseMatrix | None, n: int) -> np.ndarray:
    return np.eye(n) if A is None else np.asarray(A.toarray(), dtype=np.float64)


def petrov_quasi_optimality(
    model: ReducedModel,
    op: AffineOperator,
    theta: ArrayLike,
    M: SpdWeight | None = None,
    M_test: SpdWeight | None = None,
) -> QuasiOptimality:
    """Constants of the best-approximation bound of a Petrov-Galerkin model.

    ``alpha = ||L_test^-1 A L^-T||_2`` is the continuity constant of
    ``(A v, w)`` in the ``M`` x ``M_test`` norms (``M = L L^T``) and ``beta``
    the smallest singular value of ``Q^T A P`` with ``P`` M-orthonormal and
    ``Q`` M_test-orthonormal. Dense, so limited to ``n <= DENSE_LIMIT``.
    """
    if model.variant != "petrov_galerkin":
        raise KrbError(f"quasi-optimality needs a Petrov-Galerkin model, got {model.variant}")
    n = op.n
    if n > DENSE_LIMIT:
        raise DimensionMismatchError(f"dense SVD limited to n <= {DENSE_LIMIT}, got {n}")
    trial = M if M is not None else SpdWeight.identity()
    test = M_test if M_test is not None else trial
    A = np.asarray(op.assemble(theta).toarray())

    L = scipy.linalg.cholesky(_dense(trial.matrix, n), lower=True)
    L_test = scipy.linalg.cholesky(_dense(test.matrix, n), lower=True)
    scaled = scipy.linalg.solve_triangular(L_test, A, lower=True)
    scaled = scipy.linalg.solve_triangular(L, scaled.T, lower=True).T
    alpha = float(np.linalg.norm(scaled, 2))

    P, _ = gram_schmidt_m(list(model.P.T), trial)
    Q, _ = gram_schmidt_m(list(model.Q.T), test)
    k = min(P.shape[1], Q.shape[1])
    beta = float(np.linalg.svd(Q[:, :k].T @ A @ P[:, :k], compute_uv=False).min())
    constant = alpha / beta if beta > 0.0 else math.inf
    return QuasiOptimality(alpha=alpha, beta=beta, constant=constant)
