from krb.exceptions import KrbError
from krb.reductors.base import BaseReductor
from krb.reductors.galerkin import GalerkinReductor
from krb.reductors.least_squares import LeastSquaresReductor
from krb.reductors.petrov import PetrovGalerkinReductor

REDUCTORS: dict[str, type[BaseReductor]] = {
    cls.variant: cls for cls in (GalerkinReductor, LeastSquaresReductor, PetrovGalerkinReductor)
}


def reductor_for(variant: str) -> type[BaseReductor]:
    """Reductor class handling the online stage of ``variant``."""
    try:
        return REDUCTORS[variant]
    except KeyError as e:
        raise KrbError(f"unknown model variant {variant!r}") from e


__all__ = [
    "REDUCTORS",
    "BaseReductor",
    "GalerkinReductor",
    "LeastSquaresReductor",
    "PetrovGalerkinReductor",
    "reductor_for",
]
