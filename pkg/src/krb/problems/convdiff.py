"""Convection-diffusion with a constant divergence-free velocity."""

from __future__ import annotations

import logging

from krb.linalg import AffineOperator
from krb.problems.bundle import ProblemBundle
from krb.problems.mesh import StructuredMesh
from krb.problems.registry import make_theta_map

logger = logging.getLogger(__name__)

VELOCITY = (1.0, -2.0)
LOAD = 10.0


def conv_diff2d(n_cells: int) -> ProblemBundle:
    """``-nu1 lap u + cos(nu2) b . grad u = 10`` on ``[-1, 1]^2``, ``b = (1, -2)``.

    The convection term is skew-symmetric, so ``A(mu)`` is nonsymmetric with a
    positive definite symmetric part whenever ``nu1 > 0``.
    """
    mesh = StructuredMesh(n_cells)
    stiffness = mesh.assemble(mesh.stiffness_local())
    convection = mesh.assemble(mesh.convection_local(VELOCITY))
    bundle = ProblemBundle(
        name="convdiff",
        op=AffineOperator((stiffness, convection)),
        rhs=mesh.assemble_vector(mesh.load_local(LOAD)),
        theta_map=make_theta_map("convdiff", {"b_x": VELOCITY[0], "b_y": VELOCITY[1]}),
        norms={"h1_semi": stiffness, "l2": mesh.assemble(mesh.mass_local())},
        mesh_meta=mesh.meta(),
        spd=False,
    )
    logger.debug("generated convdiff problem with %d dofs", bundle.n)
    return bundle
