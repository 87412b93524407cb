"""Shared projection machinery for the reduced-model variants."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, ClassVar

import numpy as np

from krb.exceptions import DimensionMismatchError
from krb.linalg import AffineOperator, DenseMatrix, Vector, as_vector

if TYPE_CHECKING:
    from numpy.typing import ArrayLike

    from krb.models import ReducedModel, Variant


class BaseReductor(ABC):
    """Base class for all reductors.

    A reductor projects an affine operator and right-hand side onto a reduced
    basis once (:meth:`reduce`, implemented by the variants) and solves the
    resulting small systems for any coefficient vector
    (:meth:`solve_reduced`). Residual norms are evaluated from stored
    ``m``-sized blocks through the expansion
    ``||g - T(theta) c||^2 = ||g||^2 - 2 theta^T R c + c^T G(theta) c``.
    """

    variant: ClassVar[Variant]

    def __init__(self, op: AffineOperator, f: ArrayLike) -> None:
        self._op = op
        self._f = as_vector(f, "f")
        if self._f.shape[0] != op.n:
            raise DimensionMismatchError(
                f"right-hand side of length {self._f.shape[0]} for an operator of size {op.n}",
            )

    @property
    def op(self) -> AffineOperator:
        return self._op

    @abstractmethod
    def reduce(self, P: DenseMatrix, *args: object, **kwargs: object) -> ReducedModel:
        """Precompute the reduced blocks for the trial basis ``P``."""

    @staticmethod
    @abstractmethod
    def solve_reduced(model: ReducedModel, theta: ArrayLike) -> Vector:
        """Coordinates of the reduced solution at ``theta``."""

    @staticmethod
    @abstractmethod
    def residual_norm(model: ReducedModel, theta: ArrayLike, coords: Vector) -> float:
        """Relative residual of the lifted solution, from reduced data only."""

    def _check_basis(self, P: DenseMatrix) -> DenseMatrix:
        P = np.asarray(P, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != self._op.n:
            raise DimensionMismatchError(
                f"basis of shape {P.shape} for an operator of size {self._op.n}",
            )
        return P

    def _images(self, P: DenseMatrix) -> list[DenseMatrix]:
        """``A_j P`` for every affine term."""
        return [np.asarray(term @ P) for term in self._op.terms]

    @staticmethod
    def _gram_blocks(left: list[DenseMatrix], right: list[DenseMatrix]) -> np.ndarray:
        """``G[j, k] = left_j^T right_k``, made exactly block-symmetric."""
        J = len(left)
        m = left[0].shape[1]
        G = np.empty((J, J, m, m))
        for j in range(J):
            for k in range(j, J):
                G[j, k] = left[j].T @ right[k]
                G[k, j] = G[j, k].T
        return G

    @staticmethod
    def combine(blocks: np.ndarray, theta: ArrayLike) -> np.ndarray:
        """``sum_j theta_j blocks[j]``."""
        return np.tensordot(np.asarray(theta, dtype=np.float64), blocks, axes=1)

    @staticmethod
    def combine_gram(gram: np.ndarray, theta: ArrayLike) -> np.ndarray:
        """``sum_{j,k} theta_j theta_k gram[j, k]``."""
        t = np.asarray(theta, dtype=np.float64)
        return np.einsum("j,k,jkab->ab", t, t, gram)

    @staticmethod
    def quadratic_residual(
        gram: np.ndarray,
        rhs: np.ndarray,
        g_norm2: float,
        theta: ArrayLike,
        coords: Vector,
    ) -> float:
        t = np.asarray(theta, dtype=np.float64)
        value = (
            g_norm2
            - 2.0 * float(t @ (rhs @ coords))
            + float(coords @ (BaseReductor.combine_gram(gram, t) @ coords))
        )
        if g_norm2 <= 0.0:
            return 0.0
        return float(np.sqrt(max(value, 0.0) / g_norm2))
