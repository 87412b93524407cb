"""Two-term SPD problem ``(1/nu1) K + nu2 M``, the H1 analog of the eddy-current model."""

from __future__ import annotations

import logging

from krb.linalg import AffineOperator, as_csr
from krb.problems.bundle import ProblemBundle
from krb.problems.mesh import StructuredMesh
from krb.problems.registry import make_theta_map

logger = logging.getLogger(__name__)

LOAD = 10.0


def stiff_mass2d(n_cells: int) -> ProblemBundle:
    mesh = StructuredMesh(n_cells)
    stiffness = mesh.assemble(mesh.stiffness_local())
    mass = mesh.assemble(mesh.mass_local())
    bundle = ProblemBundle(
        name="stiffmass",
        op=AffineOperator((stiffness, mass)),
        rhs=mesh.assemble_vector(mesh.load_local(LOAD)),
        theta_map=make_theta_map("stiffmass"),
        norms={"h1_semi": stiffness, "l2": mass, "combined": as_csr(stiffness + mass)},
        mesh_meta=mesh.meta(),
        spd=True,
    )
    logger.debug("generated stiffmass problem with %d dofs", bundle.n)
    return bundle
