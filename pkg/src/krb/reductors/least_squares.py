"""Minimal preconditioned residual in the M-norm.

For ``u = P c`` the online problem

    min_c || B f - B A(theta) P c ||_M

has the normal equations ``(sum_{j,k} theta_j theta_k G_jk) c = sum_j theta_j h_j``
with ``G_jk = (B A_j P)^T M (B A_k P)`` and ``h_j = (B A_j P)^T M B f``, both
independent of ``theta``.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, ClassVar

import numpy as np

from krb.exceptions import DimensionMismatchError
from krb.linalg import DenseMatrix, SpdWeight, Vector, dense_solve
from krb.models import ReducedModel, empty_meta
from krb.reductors.base import BaseReductor

if TYPE_CHECKING:
    from numpy.typing import ArrayLike

    from krb.factor import LinearOperatorHandle
    from krb.linalg import AffineOperator
    from krb.models import BasisMeta, Variant


class LeastSquaresReductor(BaseReductor):
    variant: ClassVar[Variant] = "least_squares"

    def __init__(
        self,
        op: AffineOperator,
        f: ArrayLike,
        B: LinearOperatorHandle,
        M: SpdWeight | None = None,
    ) -> None:
        super().__init__(op, f)
        if B.dim != op.n:
            raise DimensionMismatchError(f"preconditioner of size {B.dim} for size {op.n}")
        self._B = B
        self._M = M if M is not None else SpdWeight.identity()

    def reduce(self, P: DenseMatrix, meta: BasisMeta | None = None) -> ReducedModel:
        P = self._check_basis(P)
        precond = [np.asarray(self._B.apply(image)) for image in self._images(P)]
        weighted = [np.asarray(self._M.apply(block)) for block in precond]
        Bf = self._B.apply(self._f)
        MBf = self._M.apply(Bf)
        return ReducedModel(
            variant=self.variant,
            P=P,
            J=self._op.J,
            f_norm2=float(Bf @ MBf),
            ls_gram=self._gram_blocks(precond, weighted),
            ls_rhs=np.stack([block.T @ MBf for block in precond]),
            meta=meta if meta is not None else empty_meta("custom"),
        )

    @staticmethod
    def solve_reduced(model: ReducedModel, theta: ArrayLike) -> Vector:
        t = np.asarray(theta, dtype=np.float64)
        G = BaseReductor.combine_gram(model.ls_gram, t)
        h = t @ model.ls_rhs
        return dense_solve(G, h, theta=t.tolist())

    @staticmethod
    def residual_norm(model: ReducedModel, theta: ArrayLike, coords: Vector) -> float:
        """``||B f - B A(theta) P c||_M / ||B f||_M``."""
        return BaseReductor.quadratic_residual(
            model.ls_gram,
            model.ls_rhs,
            model.f_norm2,
            theta,
            coords,
        )
