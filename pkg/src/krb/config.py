import os

from dotenv import load_dotenv

load_dotenv()

# Relative tolerance below which a Gram-Schmidt candidate counts as dependent
DROP_TOL = float(os.getenv("KRB_DROP_TOL", "1e-10"))

# Relative threshold for serious Krylov breakdown (Arnoldi norm, BiCG denominators)
BREAKDOWN_TOL = float(os.getenv("KRB_BREAKDOWN_TOL", "1e-14"))

# Dense LU pivot threshold, relative to the largest entry of the reduced matrix
SINGULAR_PIVOT_TOL = float(os.getenv("KRB_SINGULAR_PIVOT_TOL", "1e-14"))

# Worker count for online sweeps and truth solves
DEFAULT_WORKERS = int(os.getenv("KRB_WORKERS", "1"))

LOG_LEVEL = os.getenv("KRB_LOG_LEVEL", "WARNING")

DEFAULT_OUTPUT_DIR = os.getenv("KRB_OUTPUT_DIR", "results")

# Steps of the Lanczos process behind the condition-number estimate
LANCZOS_STEPS = 50

# Random unit vectors sampled for field-of-values estimates
FOV_SAMPLES = 200

# Largest dimension for which dense oracles (SVD, eigenvalues) are formed
DENSE_LIMIT = 2000
