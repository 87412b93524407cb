from __future__ import annotations

from typing import TYPE_CHECKING, ClassVar

from krb.exceptions import DimensionMismatchError
from krb.reductors.galerkin import GalerkinReductor

if TYPE_CHECKING:
    from krb.linalg import DenseMatrix
    from krb.models import BasisMeta, ReducedModel, Variant


class PetrovGalerkinReductor(GalerkinReductor):
    """Petrov-Galerkin projection with trial space ``col(P)`` and test space ``col(Q)``.

    Stores ``Q^T A_j P`` and ``Q^T f``; the online solve is the Galerkin one.
    """

    variant: ClassVar[Variant] = "petrov_galerkin"

    def reduce(
        self,
        P: DenseMatrix,
        Q: DenseMatrix | None = None,
        meta: BasisMeta | None = None,
    ) -> ReducedModel:
        P = self._check_basis(P)
        if Q is None:
            raise DimensionMismatchError("a Petrov-Galerkin model needs a test basis Q")
        Q = self._check_basis(Q)
        if Q.shape != P.shape:
            raise DimensionMismatchError(
                f"test basis of shape {Q.shape} for a trial basis of shape {P.shape}",
            )
        return self._project(P, Q, meta)
