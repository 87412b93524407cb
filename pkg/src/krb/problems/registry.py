"""Coefficient maps and problem generators by name.

Exported bundles and models store only the theta-map name and its constants;
:func:`make_theta_map` rebuilds the callable from them.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

from krb.exceptions import ConfigError, ParameterDomainError
from krb.linalg import ThetaMap

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from krb.problems.bundle import ProblemBundle


def _pwcoeff(mu: tuple[float, ...]) -> Sequence[float]:
    return mu


def _convdiff(mu: tuple[float, ...]) -> Sequence[float]:
    nu1, nu2 = mu
    return (nu1, math.cos(nu2))


def _stiffmass(mu: tuple[float, ...]) -> Sequence[float]:
    nu1, nu2 = mu
    if nu1 == 0.0:
        raise ParameterDomainError("the stiffness coefficient 1/nu1 needs nu1 != 0")
    return (1.0 / nu1, nu2)


def _helmholtz(mu: tuple[float, ...]) -> Sequence[float]:
    (k,) = mu
    return (1.0, -(k**2))


def _elasticity(mu: tuple[float, ...]) -> Sequence[float]:
    nu1, nu2 = mu
    if not 0.0 < nu2 < 0.5:
        raise ParameterDomainError(f"Poisson ratio must lie in (0, 1/2), got {nu2}")
    return (nu1 / (1.0 + nu2), nu1 * nu2 / ((1.0 + nu2) * (1.0 - 2.0 * nu2)))


# name -> (function, arity, parameter dimension)
THETA_FUNCTIONS: dict[str, tuple[Callable[[tuple[float, ...]], Sequence[float]], int, int]] = {
    "pwcoeff": (_pwcoeff, 4, 4),
    "convdiff": (_convdiff, 2, 2),
    "stiffmass": (_stiffmass, 2, 2),
    "helmholtz": (_helmholtz, 2, 1),
    "elasticity": (_elasticity, 2, 2),
}


def make_theta_map(name: str, constants: dict[str, float] | None = None) -> ThetaMap:
    try:
        func, arity, dim = THETA_FUNCTIONS[name]
    except KeyError as e:
        raise ConfigError(
            f"unknown theta map {name!r}; known: {', '.join(sorted(THETA_FUNCTIONS))}",
        ) from e
    return ThetaMap(name, arity, func, dim, dict(constants or {}))


def generators() -> dict[str, Callable[[int], ProblemBundle]]:
    """Problem name -> generator taking the number of cells per side."""
    from krb.problems.convdiff import conv_diff2d
    from krb.problems.elasticity import elasticity2d
    from krb.problems.helmholtz import helmholtz2d
    from krb.problems.poisson import poisson_pw2d
    from krb.problems.stiffmass import stiff_mass2d

    return {
        "pwcoeff": poisson_pw2d,
        "convdiff": conv_diff2d,
        "stiffmass": stiff_mass2d,
        "helmholtz": helmholtz2d,
        "elasticity": elasticity2d,
    }


def generate(name: str, n_cells: int) -> ProblemBundle:
    """Build the named problem on an ``n_cells x n_cells`` mesh."""
    table = generators()
    if name not in table:
        raise ConfigError(f"unknown problem {name!r}; known: {', '.join(sorted(table))}")
    return table[name](n_cells)
