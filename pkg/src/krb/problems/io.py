"""Bundle directories: one Matrix Market file per term, norm matrix and the rhs.

``manifest.json`` records the problem name, the theta-map identifier and
constants, the mesh description and the file of every matrix.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

from krb.exceptions import CorruptManifestError, PersistenceError
from krb.linalg import AffineOperator, max_asymmetry
from krb.mmio import read_sparse, read_vector, write_dense, write_sparse
from krb.problems.bundle import ProblemBundle
from krb.problems.registry import make_theta_map

logger = logging.getLogger(__name__)

BUNDLE_FORMAT = "krb-problem-bundle"
BUNDLE_VERSION = 1
MANIFEST_FILE = "manifest.json"


def export_bundle(bundle: ProblemBundle, path: str | Path) -> Path:
    """Write ``bundle`` into the directory ``path``."""
    directory = Path(path)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise PersistenceError(f"cannot create {directory}: {e}") from e

    symmetric = [max_asymmetry(term) == 0.0 for term in bundle.op.terms]
    terms = []
    for j, (term, sym) in enumerate(zip(bundle.op.terms, symmetric, strict=True)):
        name = f"A{j + 1}.mtx"
        write_sparse(directory / name, term, symmetric=sym, comment=f"{bundle.name} term {j + 1}")
        terms.append(name)
    norms = {}
    for key, matrix in bundle.norms.items():
        name = f"norm_{key}.mtx"
        write_sparse(directory / name, matrix, symmetric=True, comment=f"{key} norm")
        norms[key] = name
    write_dense(directory / "rhs.mtx", bundle.rhs, comment=f"{bundle.name} load")

    manifest = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "name": bundle.name,
        "theta_map": {"name": bundle.theta_map.name, "constants": bundle.theta_map.constants},
        "n": bundle.n,
        "J": bundle.op.J,
        "spd": bundle.spd,
        "mesh": bundle.mesh_meta,
        "terms": terms,
        "norms": norms,
        "rhs": "rhs.mtx",
        "blocks": [block.tolist() for block in bundle.blocks],
    }
    try:
        (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    except OSError as e:
        raise PersistenceError(f"cannot write manifest in {directory}: {e}") from e
    logger.info("exported %s bundle (n=%d) to %s", bundle.name, bundle.n, directory)
    return directory


def import_bundle(path: str | Path) -> ProblemBundle:
    """Read a bundle written by :func:`export_bundle`.

    Raises:
        CorruptManifestError: If the manifest is unreadable or incomplete.
        PersistenceError: If a referenced matrix file cannot be read.
        DimensionMismatchError: If the files disagree in size.
    """
    directory = Path(path)
    try:
        text = (directory / MANIFEST_FILE).read_text(encoding="utf-8")
        manifest: dict[str, Any] = json.loads(text)
    except json.JSONDecodeError as e:
        raise CorruptManifestError(f"bundle manifest in {directory} is not valid JSON: {e}") from e
    except OSError as e:
        raise PersistenceError(f"cannot read bundle manifest in {directory}: {e}") from e
    if manifest.get("format") != BUNDLE_FORMAT or manifest.get("version") != BUNDLE_VERSION:
        raise CorruptManifestError(f"{directory} does not hold a version {BUNDLE_VERSION} bundle")

    try:
        terms = tuple(read_sparse(directory / name) for name in manifest["terms"])
        norms = {key: read_sparse(directory / name) for key, name in manifest["norms"].items()}
        rhs = read_vector(directory / manifest["rhs"])
        theta_spec = manifest["theta_map"]
        theta_map = make_theta_map(theta_spec["name"], theta_spec.get("constants"))
        bundle = ProblemBundle(
            name=str(manifest["name"]),
            op=AffineOperator(terms),
            rhs=rhs,
            theta_map=theta_map,
            norms=norms,
            mesh_meta=manifest["mesh"],
            spd=bool(manifest["spd"]),
            blocks=[np.asarray(block, dtype=np.intp) for block in manifest.get("blocks", [])],
        )
    except (KeyError, TypeError) as e:
        raise CorruptManifestError(f"incomplete bundle manifest in {directory}: {e}") from e
    if bundle.n != manifest.get("n") or bundle.op.J != manifest.get("J"):
        raise CorruptManifestError(
            f"bundle files give n={bundle.n}, J={bundle.op.J}; manifest says "
            f"n={manifest.get('n')}, J={manifest.get('J')}",
        )
    return bundle
