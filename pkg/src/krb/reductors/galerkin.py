"""Galerkin projection: trial and test space are both ``col(P)``."""

from __future__ import annotations

from typing import TYPE_CHECKING, ClassVar

import numpy as np

from krb.linalg import DenseMatrix, Vector, dense_solve
from krb.models import ReducedModel, empty_meta
from krb.reductors.base import BaseReductor

if TYPE_CHECKING:
    from numpy.typing import ArrayLike

    from krb.models import BasisMeta, Variant


class GalerkinReductor(BaseReductor):
    """Stores ``P^T A_j P`` and ``P^T f``; online solves ``(sum_j theta_j P^T A_j P) c = P^T f``."""

    variant: ClassVar[Variant] = "galerkin"

    def reduce(self, P: DenseMatrix, meta: BasisMeta | None = None) -> ReducedModel:
        P = self._check_basis(P)
        return self._project(P, P, meta)

    def _project(self, P: DenseMatrix, Q: DenseMatrix, meta: BasisMeta | None) -> ReducedModel:
        images = self._images(P)
        reduced_A = np.stack([Q.T @ image for image in images])
        res_rhs = np.stack([image.T @ self._f for image in images])
        return ReducedModel(
            variant=self.variant,
            P=P,
            Q=None if self.variant == "galerkin" else Q,
            J=self._op.J,
            f_norm2=float(self._f @ self._f),
            reduced_A=reduced_A,
            reduced_f=Q.T @ self._f,
            res_gram=self._gram_blocks(images, images),
            res_rhs=res_rhs,
            meta=meta if meta is not None else empty_meta("custom"),
        )

    @staticmethod
    def solve_reduced(model: ReducedModel, theta: ArrayLike) -> Vector:
        A_r = BaseReductor.combine(model.reduced_A, theta)
        return dense_solve(A_r, model.reduced_f, theta=np.asarray(theta).tolist())

    @staticmethod
    def residual_norm(model: ReducedModel, theta: ArrayLike, coords: Vector) -> float:
        """``||f - A(theta) P c|| / ||f||``."""
        return BaseReductor.quadratic_residual(
            model.res_gram,
            model.res_rhs,
            model.f_norm2,
            theta,
            coords,
        )
