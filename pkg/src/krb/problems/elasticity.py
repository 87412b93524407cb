"""Plane-strain linear elasticity with Lame-type coefficients.

``a1(u, v) = int eps(u) : eps(v)`` and ``a2(u, v) = int div(u) div(v)``
on vector linear elements with interleaved dofs.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from krb.linalg import AffineOperator
from krb.problems.bundle import ProblemBundle
from krb.problems.mesh import StructuredMesh
from krb.problems.registry import make_theta_map

logger = logging.getLogger(__name__)

LOAD = (10.0, 10.0)
DOFS_PER_VERTEX = 2


def strain_matrices(mesh: StructuredMesh) -> np.ndarray:
    """Per-triangle map from the six element dofs to ``(eps_xx, eps_yy, sqrt(2) eps_xy)``."""
    g = mesh.gradients
    gx, gy = g[..., 0], g[..., 1]
    strain = np.zeros((g.shape[0], 3, 6))
    strain[:, 0, 0::2] = gx
    strain[:, 1, 1::2] = gy
    strain[:, 2, 0::2] = gy / math.sqrt(2.0)
    strain[:, 2, 1::2] = gx / math.sqrt(2.0)
    return strain


def divergence_rows(mesh: StructuredMesh) -> np.ndarray:
    g = mesh.gradients
    div = np.zeros((g.shape[0], 6))
    div[:, 0::2] = g[..., 0]
    div[:, 1::2] = g[..., 1]
    return div


def _componentwise(local: np.ndarray) -> np.ndarray:
    """Scalar element matrices acting on each displacement component separately."""
    return np.einsum("tij,ab->tiajb", local, np.eye(DOFS_PER_VERTEX)).reshape(local.shape[0], 6, 6)


def elasticity2d(n_cells: int) -> ProblemBundle:
    """Clamped square ``[-1, 1]^2`` under the body force ``(10, 10)``.

    ``theta(nu1, nu2) = (nu1 / (1 + nu2), nu1 nu2 / ((1 + nu2)(1 - 2 nu2)))``
    with ``nu1`` the Young modulus and ``nu2`` the Poisson ratio.
    """
    mesh = StructuredMesh(n_cells)
    k = DOFS_PER_VERTEX
    area = mesh.areas[:, None, None]
    strain = strain_matrices(mesh)
    div = divergence_rows(mesh)
    a1 = mesh.assemble(area * np.einsum("tra,trb->tab", strain, strain), k)
    a2 = mesh.assemble(area * np.einsum("ta,tb->tab", div, div), k)

    load = np.stack([mesh.load_local(value) for value in LOAD], axis=-1).reshape(-1, 3 * k)
    n = mesh.interior.size * k
    bundle = ProblemBundle(
        name="elasticity",
        op=AffineOperator((a1, a2)),
        rhs=mesh.assemble_vector(load, k),
        theta_map=make_theta_map("elasticity"),
        norms={
            "h1_semi": mesh.assemble(_componentwise(mesh.stiffness_local()), k),
            "l2": mesh.assemble(_componentwise(mesh.mass_local()), k),
        },
        mesh_meta=mesh.meta(k),
        spd=True,
        blocks=[np.arange(0, n, k), np.arange(1, n, k)],
    )
    logger.debug("generated elasticity problem with %d dofs", bundle.n)
    return bundle
