"""Instrumented PCG, M-norm GMRES and BiCG.

Every run starts from ``u_0 = 0`` and records the vectors the offline stages
harvest. A run with ``m`` requested basis vectors performs at most ``m - 1``
update steps, so ``trace.iterates[-1]`` of a run with ``m + 1`` is the
``m``-th iterate.

With the default ``tol = 0`` a run performs all ``m - 1`` steps unless the
residual vanishes exactly or a breakdown occurs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal, TypeAlias

import numpy as np
import scipy.sparse as sp

from krb.config import BREAKDOWN_TOL
from krb.exceptions import NumericalBreakdownError
from krb.linalg import SpdWeight, Vector, as_vector

if TYPE_CHECKING:
    from collections.abc import Callable

    from krb.models import StopReason

logger = logging.getLogger(__name__)

Operator: TypeAlias = "Callable[[Vector], Vector] | sp.spmatrix | np.ndarray"


@dataclass
class KrylovTrace:
    """Per-iteration record of a Krylov run.

    ``directions``/``dual_directions`` are the search directions of PCG and
    BiCG, ``z``/``z_star`` the preconditioned (dual) residuals, ``alpha`` and
    ``beta`` the recurrence scalars, one per completed step.
    """

    method: Literal["pcg", "gmres", "bicg"]
    iterates: list[Vector] = field(default_factory=list)
    directions: list[Vector] = field(default_factory=list)
    dual_directions: list[Vector] = field(default_factory=list)
    z: list[Vector] = field(default_factory=list)
    z_star: list[Vector] = field(default_factory=list)
    alpha: list[float] = field(default_factory=list)
    beta: list[float] = field(default_factory=list)
    residual_norms: list[float] = field(default_factory=list)
    stop_reason: StopReason = "max_iter"

    @property
    def steps(self) -> int:
        return len(self.iterates) - 1


def as_operator(A: Operator) -> Callable[[Vector], Vector]:
    """Accept a callable, a sparse matrix or a dense array as a linear map."""
    if callable(A):
        return A
    if sp.issparse(A) or isinstance(A, np.ndarray):
        return lambda x: A @ x
    raise TypeError(f"cannot use {type(A).__name__} as a linear operator")


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


def pcg_run(
    A_apply: Operator,
    B_apply: Operator,
    f: Vector,
    m: int,
    tol: float = 0.0,
) -> KrylovTrace:
    """Preconditioned conjugate gradients recording ``p_0, ..., p_{m-1}``.

    Args:
        A_apply (Operator): The SPD system operator.
        B_apply (Operator): The SPD preconditioner.
        f (Vector): Right-hand side.
        m (int): Number of search directions wanted (``m >= 1``).
        tol (float): Relative residual tolerance for an early stop.

    Returns:
        KrylovTrace: Iterates ``u_0..u_k``, directions and preconditioned residuals
            ``p_0..p_k``, ``z_0..z_k`` and the scalars of every step.

    Raises:
        NumericalBreakdownError: If a recurrence scalar is not finite.
    """
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    A = as_operator(A_apply)
    B = as_operator(B_apply)
    f = as_vector(f, "f")
    trace = KrylovTrace("pcg")
    f_norm = float(np.linalg.norm(f))
    threshold = tol * f_norm

    u = np.zeros_like(f)
    r = f.copy()
    trace.iterates.append(u)
    trace.residual_norms.append(f_norm)
    if f_norm == 0.0:
        trace.stop_reason = "tolerance"
        return trace
    z = B(r)
    p = z.copy()
    rz = float(r @ z)
    trace.z.append(z)
    trace.directions.append(p)

    for _ in range(1, m):
        Ap = A(p)
        pAp = float(Ap @ p)
        if not _finite(pAp, rz):
            trace.stop_reason = "breakdown"
            raise NumericalBreakdownError("PCG produced a nonfinite scalar", trace)
        if pAp <= 0.0 or rz <= 0.0:
            trace.stop_reason = "breakdown"
            break
        alpha = rz / pAp
        u = u + alpha * p
        r = r - alpha * Ap
        r_norm = float(np.linalg.norm(r))
        trace.alpha.append(alpha)
        trace.iterates.append(u)
        trace.residual_norms.append(r_norm)
        if r_norm <= threshold:
            trace.stop_reason = "tolerance"
            break

        z = B(r)
        rz_new = float(r @ z)
        beta = rz_new / rz
        if not _finite(beta):
            trace.stop_reason = "breakdown"
            raise NumericalBreakdownError("PCG produced a nonfinite scalar", trace)
        p = z + beta * p
        rz = rz_new
        trace.beta.append(beta)
        trace.z.append(z)
        trace.directions.append(p)

    logger.debug("pcg stopped after %d steps (%s)", trace.steps, trace.stop_reason)
    return trace


def gmres_run(
    A_apply: Operator,
    B_apply: Operator,
    f: Vector,
    m: int,
    M: SpdWeight | None = None,
    tol: float = 0.0,
) -> KrylovTrace:
    """GMRES for ``B A u = B f`` minimizing the residual in the M-norm.

    The Arnoldi basis is built with modified Gram-Schmidt plus one
    reorthogonalization pass in the M-inner product. ``z_j = B(f - A u_j)`` is
    recorded for ``j = 0..m-1``; ``residual_norms`` are the least-squares
    residuals ``||B f - B A u_j||_M``.

    A happy breakdown (next Arnoldi norm below ``BREAKDOWN_TOL * ||B f||_M``)
    records the exact iterate and stops with ``stop_reason="breakdown"``.
    """
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    A = as_operator(A_apply)
    B = as_operator(B_apply)
    weight = M if M is not None else SpdWeight.identity()
    f = as_vector(f, "f")
    trace = KrylovTrace("gmres")

    z0 = B(f)
    beta = weight.norm(z0)
    trace.iterates.append(np.zeros_like(f))
    trace.residual_norms.append(beta)
    if beta == 0.0:
        trace.stop_reason = "tolerance"
        return trace
    trace.z.append(z0)
    threshold = tol * beta

    V = [z0 / beta]
    MV = [weight.apply(V[0])]
    H = np.zeros((m, max(m - 1, 1)))

    for k in range(1, m):
        w = B(A(V[k - 1]))
        for _ in range(2):
            for i, (v, mv) in enumerate(zip(V, MV, strict=True)):
                h = float(mv @ w)
                H[i, k - 1] += h
                w = w - h * v
        h_next = weight.norm(w)
        if not _finite(h_next, *H[:k, k - 1]):
            trace.stop_reason = "breakdown"
            raise NumericalBreakdownError("Arnoldi produced a nonfinite value", trace)
        H[k, k - 1] = h_next

        rhs = np.zeros(k + 1)
        rhs[0] = beta
        Hk = H[: k + 1, :k]
        y = np.linalg.lstsq(Hk, rhs, rcond=None)[0]
        u = np.column_stack(V[:k]) @ y
        res = float(np.linalg.norm(rhs - Hk @ y))
        trace.iterates.append(u)
        trace.residual_norms.append(res)

        if h_next <= BREAKDOWN_TOL * beta:
            trace.stop_reason = "breakdown"
            break
        if res <= threshold:
            trace.stop_reason = "tolerance"
            break
        trace.z.append(B(f - A(u)))
        V.append(w / h_next)
        MV.append(weight.apply(V[-1]))

    logger.debug("gmres stopped after %d steps (%s)", trace.steps, trace.stop_reason)
    return trace


def bicg_run(
    A_apply: Operator,
    At_apply: Operator,
    B_apply: Operator,
    Bt_apply: Operator,
    f: Vector,
    r0_star: Vector | None = None,
    m: int = 1,
    tol: float = 0.0,
) -> KrylovTrace:
    """Preconditioned BiCG recording the primal and dual directions.

    ``r0_star`` defaults to ``f``. A serious breakdown, where
    ``|(r, z*)|`` or ``|(A p, p*)|`` falls below ``BREAKDOWN_TOL`` times the
    product of the norms involved, stops the run with the partial trace.
    """
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    A = as_operator(A_apply)
    At = as_operator(At_apply)
    B = as_operator(B_apply)
    Bt = as_operator(Bt_apply)
    f = as_vector(f, "f")
    r_star = f.copy() if r0_star is None else as_vector(r0_star, "r0_star").copy()
    trace = KrylovTrace("bicg")
    f_norm = float(np.linalg.norm(f))
    threshold = tol * f_norm

    u = np.zeros_like(f)
    r = f.copy()
    trace.iterates.append(u)
    trace.residual_norms.append(f_norm)
    if f_norm == 0.0:
        trace.stop_reason = "tolerance"
        return trace
    z = B(r)
    z_star = Bt(r_star)
    p = z.copy()
    p_star = z_star.copy()
    rz = float(r @ z_star)
    if abs(rz) <= BREAKDOWN_TOL * f_norm * float(np.linalg.norm(z_star)):
        trace.stop_reason = "breakdown"
        logger.warning("BiCG shadow residual is orthogonal to the residual")
        return trace
    trace.z.append(z)
    trace.z_star.append(z_star)
    trace.directions.append(p)
    trace.dual_directions.append(p_star)

    for _ in range(1, m):
        Ap = A(p)
        denom = float(Ap @ p_star)
        if not _finite(denom, rz):
            trace.stop_reason = "breakdown"
            raise NumericalBreakdownError("BiCG produced a nonfinite scalar", trace)
        if abs(denom) <= BREAKDOWN_TOL * float(np.linalg.norm(Ap) * np.linalg.norm(p_star)):
            trace.stop_reason = "breakdown"
            break
        alpha = rz / denom
        u = u + alpha * p
        r = r - alpha * Ap
        r_star = r_star - alpha * At(p_star)
        r_norm = float(np.linalg.norm(r))
        trace.alpha.append(alpha)
        trace.iterates.append(u)
        trace.residual_norms.append(r_norm)
        if r_norm <= threshold:
            trace.stop_reason = "tolerance"
            break

        z = B(r)
        z_star = Bt(r_star)
        rz_new = float(r @ z_star)
        if not _finite(rz_new):
            trace.stop_reason = "breakdown"
            raise NumericalBreakdownError("BiCG produced a nonfinite scalar", trace)
        if abs(rz_new) <= BREAKDOWN_TOL * r_norm * float(np.linalg.norm(z_star)):
            trace.stop_reason = "breakdown"
            break
        beta = rz_new / rz
        p = z + beta * p
        p_star = z_star + beta * p_star
        rz = rz_new
        trace.beta.append(beta)
        trace.z.append(z)
        trace.z_star.append(z_star)
        trace.directions.append(p)
        trace.dual_directions.append(p_star)

    logger.debug("bicg stopped after %d steps (%s)", trace.steps, trace.stop_reason)
    return trace
