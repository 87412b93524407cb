from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from krb.exceptions import DimensionMismatchError

if TYPE_CHECKING:
    from krb.linalg import AffineOperator, SparseMatrix, ThetaMap, Vector
    from krb.models import MeshMeta


@dataclass(frozen=True, eq=False)
class ProblemBundle:
    """An affine-parametric discrete problem together with its norm matrices.

    ``spd`` says whether ``A(mu)`` is SPD on the intended parameter box, which
    selects Cholesky over LU for factorizations. ``blocks`` optionally splits
    the unknowns (e.g. displacement components) for block preconditioners.
    """

    name: str
    op: AffineOperator
    rhs: Vector
    theta_map: ThetaMap
    norms: dict[str, SparseMatrix]
    mesh_meta: MeshMeta
    spd: bool
    blocks: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        n = self.op.n
        if self.rhs.shape != (n,):
            raise DimensionMismatchError(f"rhs of shape {self.rhs.shape} for operator size {n}")
        if not np.all(np.isfinite(self.rhs)):
            raise ValueError("rhs has nonfinite entries")
        for name, N in self.norms.items():
            if N.shape != (n, n):
                raise DimensionMismatchError(f"norm {name} has shape {N.shape}, expected {(n, n)}")
        if self.theta_map.arity != self.op.J:
            raise DimensionMismatchError(
                f"theta map {self.theta_map.name} has arity {self.theta_map.arity}, "
                f"operator has {self.op.J} terms",
            )

    @property
    def n(self) -> int:
        return self.op.n

    def theta(self, mu: tuple[float, ...] | list[float]) -> np.ndarray:
        return self.theta_map(mu)
