"""Matrix Market reading and writing for sparse matrices, vectors and dense matrices."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from krb.exceptions import PersistenceError
from krb.linalg import DenseMatrix, SparseMatrix, Vector, as_csr


def write_sparse(
    path: str | Path,
    A: SparseMatrix,
    symmetric: bool = False,
    comment: str = "",
) -> None:
    """Write ``A`` in coordinate format; ``symmetric`` stores the lower triangle only.

    Args:
        path (str | Path): Target file, conventionally ending in ``.mtx``.
        A (SparseMatrix): Matrix to write.
        symmetric (bool): Write the ``symmetric`` kind instead of ``general``.
        comment (str): Optional comment line for the header.
    """
    A = as_csr(A)
    if symmetric:
        data = sp.tril(A).tocoo()
        kind = "symmetric"
    else:
        data = A.tocoo()
        kind = "general"
    try:
        scipy.io.mmwrite(str(path), data, comment=comment, field="real", symmetry=kind)
    except OSError as e:
        raise PersistenceError(f"cannot write {path}: {e}") from e


def write_dense(path: str | Path, values: Vector | DenseMatrix, comment: str = "") -> None:
    """Write a vector (as one column) or a dense matrix in array format."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    try:
        scipy.io.mmwrite(str(path), arr, comment=comment, field="real")
    except OSError as e:
        raise PersistenceError(f"cannot write {path}: {e}") from e


def read_sparse(path: str | Path) -> SparseMatrix:
    """Read a coordinate-format file into canonical CSR (symmetric kinds are expanded)."""
    obj = _read(path)
    if not sp.issparse(obj):
        raise PersistenceError(f"{path} holds a dense array, expected coordinate format")
    return as_csr(obj)


def read_dense(path: str | Path) -> DenseMatrix:
    obj = _read(path)
    if sp.issparse(obj):
        return np.asarray(obj.toarray(), dtype=np.float64)
    return np.asarray(obj, dtype=np.float64)


def read_vector(path: str | Path) -> Vector:
    arr = read_dense(path)
    if arr.ndim == 2 and 1 not in arr.shape:
        raise PersistenceError(f"{path} holds a {arr.shape} matrix, expected a vector")
    return arr.ravel()


def _read(path: str | Path) -> object:
    if not Path(path).is_file():
        raise PersistenceError(f"no such file: {path}")
    try:
        return scipy.io.mmread(str(path))
    except (OSError, ValueError, RuntimeError) as e:
        raise PersistenceError(f"cannot parse {path}: {e}") from e
