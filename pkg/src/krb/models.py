from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, TypedDict

import numpy as np

from krb.exceptions import ArityMismatchError, DimensionMismatchError

Variant = Literal["galerkin", "least_squares", "petrov_galerkin"]
Method = Literal["rcgbm", "rkbm1", "rkbm2", "mrcgbm", "mrkbm1", "mrkbm2"]
NormKind = Literal["energy", "h1_semi", "m_residual", "combined", "l2"]
StopReason = Literal["max_iter", "tolerance", "breakdown"]

# Arrays whose leading axis runs over the affine terms
_AFFINE_BLOCKS = frozenset({"reduced_A", "ls_gram", "ls_rhs", "res_gram", "res_rhs"})


class BasisMeta(TypedDict):
    """Provenance of a reduced basis, stored in every exported manifest."""

    method: str
    instances: list[list[float]]  # theta vectors the Krylov runs were harvested at
    m: list[int]  # requested steps per instance
    harvested: list[int]  # vectors actually harvested per instance
    stop_reasons: list[str]
    drop_tol: float | None
    orthonormalized: bool
    notes: list[str]


class MeshMeta(TypedDict):
    """Structured mesh description carried by a problem bundle."""

    nx: int
    ny: int
    nv: int
    n_dofs: int
    dofs_per_vertex: int
    corners: list[float]  # [xmin, ymin, xmax, ymax]


class Diagnostics(TypedDict):
    """Error measures and convergence-theory constants at one parameter point."""

    kappa: float | None
    gamma: float | None
    Gamma_cap: float | None
    sigma_m: float | None
    bound_pcg: float | None
    bound_gmres: float | None
    rel_error: dict[str, float | None]


class QuasiOptimality(TypedDict):
    """Continuity and discrete inf-sup constants of a Petrov-Galerkin model, and their ratio."""

    alpha: float
    beta: float
    constant: float


class SummaryRow(TypedDict):
    L: int
    m: int
    dim: int
    sup_error: float
    mean_error: float
    failures: int


class TimingRow(TypedDict):
    L: int
    m: int
    offline_s: float
    online_s: float
    truth_s: float
    points: int


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """A reduced model and the parameter-independent blocks its online stage needs.

    Galerkin and Petrov-Galerkin models keep ``reduced_A[j] = Q^T A_j P`` (with
    ``Q = P`` for Galerkin) and ``reduced_f = Q^T f``. Least-squares models keep
    the Gram blocks ``ls_gram[j, k] = (B A_j P)^T M (B A_k P)`` and
    ``ls_rhs[j] = (B A_j P)^T M B f``.

    The residual blocks ``res_gram[j, k] = (A_j P)^T (A_k P)`` and
    ``res_rhs[j] = (A_j P)^T f`` together with ``f_norm2 = ||f||^2`` let the
    online stage report residual norms without touching ``n``-sized data. A
    least-squares model reuses its Gram blocks for this and stores
    ``||B f||_M^2`` as ``f_norm2``.
    """

    variant: Variant
    P: np.ndarray
    J: int
    f_norm2: float
    Q: np.ndarray | None = None
    reduced_A: np.ndarray | None = None
    reduced_f: np.ndarray | None = None
    ls_gram: np.ndarray | None = None
    ls_rhs: np.ndarray | None = None
    res_gram: np.ndarray | None = None
    res_rhs: np.ndarray | None = None
    meta: BasisMeta = field(default_factory=lambda: empty_meta("unknown"))

    def __post_init__(self) -> None:
        n, m = self.P.shape
        J = self.J
        if J < 1:
            raise ArityMismatchError(f"a reduced model needs J >= 1, got {J}")
        expected: dict[str, tuple[int, ...]] = {}
        if self.variant == "least_squares":
            expected = {"ls_gram": (J, J, m, m), "ls_rhs": (J, m)}
        else:
            expected = {
                "reduced_A": (J, m, m),
                "reduced_f": (m,),
                "res_gram": (J, J, m, m),
                "res_rhs": (J, m),
            }
            if self.variant == "petrov_galerkin":
                expected["Q"] = (n, m)
        for name, shape in expected.items():
            value = getattr(self, name)
            if value is None:
                raise DimensionMismatchError(f"{self.variant} model is missing {name}")
            if name in _AFFINE_BLOCKS and value.shape[:1] != (J,):
                raise ArityMismatchError(
                    f"{name} holds {value.shape[0]} affine blocks, expected {J}",
                )
            if value.shape != shape:
                raise DimensionMismatchError(
                    f"{name} has shape {value.shape}, expected {shape}",
                )

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def m(self) -> int:
        return self.P.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        """Every array-valued field that is set, in a fixed order."""
        names = ("P", "Q", "reduced_A", "reduced_f", "ls_gram", "ls_rhs", "res_gram", "res_rhs")
        return {name: getattr(self, name) for name in names if getattr(self, name) is not None}


def empty_meta(method: str) -> BasisMeta:
    return BasisMeta(
        method=method,
        instances=[],
        m=[],
        harvested=[],
        stop_reasons=[],
        drop_tol=None,
        orthonormalized=False,
        notes=[],
    )
