"""
krb - reduced Krylov basis methods for affine-parametric linear systems.
"""

from krb.exceptions import KrbError
from krb.experiments import ExperimentConfig, preset, run_experiment
from krb.factor import LinearOperatorHandle, make_exact_preconditioner
from krb.linalg import AffineOperator, SpdWeight, ThetaMap, assemble_affine
from krb.models import ReducedModel
from krb.online import online_solve, online_sweep
from krb.persistence import export_model, import_model
from krb.rkbm import build_multi, build_rcgbm, build_rkbm1, build_rkbm2

__all__ = [
    "AffineOperator",
    "ExperimentConfig",
    "KrbError",
    "LinearOperatorHandle",
    "ReducedModel",
    "SpdWeight",
    "ThetaMap",
    "assemble_affine",
    "build_multi",
    "build_rcgbm",
    "build_rkbm1",
    "build_rkbm2",
    "export_model",
    "import_model",
    "make_exact_preconditioner",
    "online_solve",
    "online_sweep",
    "preset",
    "run_experiment",
]
