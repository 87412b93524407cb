"""Helmholtz-type problem ``K - mu^2 M``."""

from __future__ import annotations

import logging

from krb.linalg import AffineOperator
from krb.problems.bundle import ProblemBundle
from krb.problems.mesh import StructuredMesh
from krb.problems.registry import make_theta_map

logger = logging.getLogger(__name__)

LOAD = 10.0


def helmholtz2d(n_cells: int) -> ProblemBundle:
    """Stiffness and mass with ``theta(mu) = (1, -mu^2)``.

    ``A(mu)`` is symmetric but indefinite once ``mu^2`` exceeds the smallest
    Dirichlet eigenvalue and singular at the eigenvalues themselves; the
    bundle is therefore flagged non-SPD and factorized with LU.
    """
    mesh = StructuredMesh(n_cells)
    stiffness = mesh.assemble(mesh.stiffness_local())
    mass = mesh.assemble(mesh.mass_local())
    bundle = ProblemBundle(
        name="helmholtz",
        op=AffineOperator((stiffness, mass)),
        rhs=mesh.assemble_vector(mesh.load_local(LOAD)),
        theta_map=make_theta_map("helmholtz"),
        norms={"h1_semi": stiffness, "l2": mass},
        mesh_meta=mesh.meta(),
        spd=False,
    )
    logger.debug("generated helmholtz problem with %d dofs", bundle.n)
    return bundle
