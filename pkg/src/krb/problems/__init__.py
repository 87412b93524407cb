from .bundle import ProblemBundle
from .convdiff import conv_diff2d
from .elasticity import elasticity2d
from .helmholtz import helmholtz2d
from .io import export_bundle, import_bundle
from .mesh import StructuredMesh
from .poisson import poisson_pw2d
from .registry import generate, generators, make_theta_map
from .stiffmass import stiff_mass2d

__all__ = [
    "ProblemBundle",
    "StructuredMesh",
    "conv_diff2d",
    "elasticity2d",
    "export_bundle",
    "generate",
    "generators",
    "helmholtz2d",
    "import_bundle",
    "make_theta_map",
    "poisson_pw2d",
    "stiff_mass2d",
]
