"""Diffusion with a piecewise constant coefficient on the four quadrants."""

from __future__ import annotations

import logging

import numpy as np

from krb.exceptions import ConfigError
from krb.linalg import AffineOperator
from krb.problems.bundle import ProblemBundle
from krb.problems.mesh import StructuredMesh
from krb.problems.registry import make_theta_map

logger = logging.getLogger(__name__)

LOAD = 10.0


def quadrant_of(centroids: np.ndarray) -> np.ndarray:
    """Quadrant index ``2 * (y > 0) + (x > 0)`` of each point."""
    return 2 * (centroids[:, 1] > 0.0).astype(int) + (centroids[:, 0] > 0.0).astype(int)


def poisson_pw2d(n_cells: int) -> ProblemBundle:
    """``-div(nu grad u) = 10`` on ``[-1, 1]^2`` with ``nu = nu_j`` on quadrant ``j``.

    Args:
        n_cells (int): Cells per side; must be even so that the quadrant
            interfaces are mesh lines.

    Returns:
        ProblemBundle: Four stiffness terms, one per quadrant, with the
            ``pwcoeff`` theta map ``theta_j = nu_j``.

    Raises:
        ConfigError: If ``n_cells`` is odd or smaller than 2.
    """
    if n_cells % 2:
        raise ConfigError(f"the quadrant layout needs an even number of cells, got {n_cells}")
    mesh = StructuredMesh(n_cells)
    local = mesh.stiffness_local()
    quadrant = quadrant_of(mesh.centroids)
    terms = tuple(mesh.assemble(local, mask=quadrant == q) for q in range(4))
    stiffness = mesh.assemble(local)
    bundle = ProblemBundle(
        name="pwcoeff",
        op=AffineOperator(terms),
        rhs=mesh.assemble_vector(mesh.load_local(LOAD)),
        theta_map=make_theta_map("pwcoeff"),
        norms={"h1_semi": stiffness, "l2": mesh.assemble(mesh.mass_local())},
        mesh_meta=mesh.meta(),
        spd=True,
    )
    logger.debug("generated pwcoeff problem with %d dofs", bundle.n)
    return bundle
