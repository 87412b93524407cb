"""Structured triangulations of a rectangle and exact linear-element kernels.

Vertex ``(i, j)`` has index ``j * (n + 1) + i``. Every cell is split along
its lower-left to upper-right diagonal into ``(a, b, c)`` and ``(a, c, d)``
with ``a = (i, j)``, ``b = (i + 1, j)``, ``c = (i + 1, j + 1)`` and
``d = (i, j + 1)``. Vector problems interleave the components,
dof ``k * v + c`` for component ``c`` of vertex ``v``.

All integrands of the kernels are polynomials of degree at most two on each
triangle, so the element matrices are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from krb.exceptions import ConfigError
from krb.linalg import SparseMatrix, Vector, as_csr, from_triplets
from krb.models import MeshMeta


@dataclass(frozen=True)
class StructuredMesh:
    n: int
    corners: tuple[float, float, float, float] = (-1.0, -1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ConfigError(f"a mesh needs at least 2 cells per side, got {self.n}")
        xmin, ymin, xmax, ymax = self.corners
        if not (xmax > xmin and ymax > ymin):
            raise ConfigError(f"degenerate domain {self.corners}")

    @property
    def nv(self) -> int:
        return (self.n + 1) ** 2

    @cached_property
    def vertices(self) -> np.ndarray:
        xmin, ymin, xmax, ymax = self.corners
        xs = np.linspace(xmin, xmax, self.n + 1)
        ys = np.linspace(ymin, ymax, self.n + 1)
        X, Y = np.meshgrid(xs, ys)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def triangles(self) -> np.ndarray:
        n = self.n
        i, j = np.meshgrid(np.arange(n), np.arange(n))
        a = (j * (n + 1) + i).ravel()
        b = a + 1
        c = a + n + 2
        d = a + n + 1
        lower = np.column_stack([a, b, c])
        upper = np.column_stack([a, c, d])
        return np.stack([lower, upper], axis=1).reshape(-1, 3)

    @cached_property
    def boundary(self) -> np.ndarray:
        """Boolean mask of the vertices on the boundary."""
        i = np.arange(self.nv) % (self.n + 1)
        j = np.arange(self.nv) // (self.n + 1)
        return (i == 0) | (j == 0) | (i == self.n) | (j == self.n)

    @cached_property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def _geometry(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.vertices[self.triangles]
        x, y = p[..., 0], p[..., 1]
        det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
        gx = np.column_stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]])
        gy = np.column_stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]])
        grads = np.stack([gx, gy], axis=-1) / det[:, None, None]
        return 0.5 * det, grads

    @property
    def areas(self) -> np.ndarray:
        return self._geometry[0]

    @property
    def gradients(self) -> np.ndarray:
        """Barycentric gradients, shape ``(triangles, 3, 2)``."""
        return self._geometry[1]

    def stiffness_local(self) -> np.ndarray:
        g = self.gradients
        return self.areas[:, None, None] * np.einsum("tik,tjk->tij", g, g)

    def mass_local(self) -> np.ndarray:
        ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
        return self.areas[:, None, None] * ref

    def convection_local(self, b: tuple[float, float]) -> np.ndarray:
        """Entry ``(i, j)`` is ``int (b . grad phi_j) phi_i``."""
        directional = self.gradients @ np.asarray(b, dtype=np.float64)
        return (self.areas / 3.0)[:, None, None] * np.broadcast_to(
            directional[:, None, :],
            (self.triangles.shape[0], 3, 3),
        )

    def load_local(self, value: float) -> np.ndarray:
        return np.repeat((value * self.areas / 3.0)[:, None], 3, axis=1)

    def element_dofs(self, dofs_per_vertex: int = 1) -> np.ndarray:
        """Global dofs of each triangle, vertex-major then component."""
        k = dofs_per_vertex
        return (k * self.triangles[:, :, None] + np.arange(k)).reshape(-1, 3 * k)

    def interior_dofs(self, dofs_per_vertex: int = 1) -> np.ndarray:
        k = dofs_per_vertex
        return (k * self.interior[:, None] + np.arange(k)).ravel()

    def assemble(
        self,
        local: np.ndarray,
        dofs_per_vertex: int = 1,
        mask: np.ndarray | None = None,
    ) -> SparseMatrix:
        """Sum element matrices into the matrix on the interior dofs.

        ``mask`` selects the triangles that contribute.
        """
        dofs = self.element_dofs(dofs_per_vertex)
        if mask is not None:
            dofs, local = dofs[mask], local[mask]
        size = self.nv * dofs_per_vertex
        rows = np.repeat(dofs, dofs.shape[1], axis=1)
        cols = np.tile(dofs, (1, dofs.shape[1]))
        full = from_triplets(rows.ravel(), cols.ravel(), local.ravel(), (size, size))
        idx = self.interior_dofs(dofs_per_vertex)
        return as_csr(full[idx][:, idx])

    def assemble_vector(self, local: np.ndarray, dofs_per_vertex: int = 1) -> Vector:
        dofs = self.element_dofs(dofs_per_vertex)
        full = np.bincount(dofs.ravel(), weights=local.ravel(), minlength=self.nv * dofs_per_vertex)
        return full[self.interior_dofs(dofs_per_vertex)]

    def refine(self) -> StructuredMesh:
        return StructuredMesh(2 * self.n, self.corners)

    def prolongate(self, u: Vector, dofs_per_vertex: int = 1) -> Vector:
        """Interpolate an interior-dof vector onto :meth:`refine` (exact for linear elements)."""
        k = dofs_per_vertex
        n = self.n
        full = np.zeros(self.nv * k)
        full[self.interior_dofs(k)] = u
        coarse = full.reshape(n + 1, n + 1, k)
        fine = np.zeros((2 * n + 1, 2 * n + 1, k))
        fine[::2, ::2] = coarse
        fine[::2, 1::2] = 0.5 * (coarse[:, :-1] + coarse[:, 1:])
        fine[1::2, ::2] = 0.5 * (coarse[:-1, :] + coarse[1:, :])
        fine[1::2, 1::2] = 0.5 * (coarse[:-1, :-1] + coarse[1:, 1:])
        return fine.reshape(-1)[self.refine().interior_dofs(k)]

    def meta(self, dofs_per_vertex: int = 1) -> MeshMeta:
        return MeshMeta(
            nx=self.n + 1,
            ny=self.n + 1,
            nv=self.nv,
            n_dofs=int(self.interior.size * dofs_per_vertex),
            dofs_per_vertex=dofs_per_vertex,
            corners=[float(c) for c in self.corners],
        )
