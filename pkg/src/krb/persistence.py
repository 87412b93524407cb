"""Export and import of reduced models.

A model directory holds ``manifest.json`` (variant, sizes, provenance, array
layout and a SHA-256 of the payload) and ``payload.bin``, the concatenation of
every array in C order as little-endian float64.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, get_args

import numpy as np

from krb.exceptions import (
    CorruptManifestError,
    HashMismatchError,
    PayloadSizeMismatchError,
    PersistenceError,
)
from krb.models import BasisMeta, ReducedModel, Variant

logger = logging.getLogger(__name__)

FORMAT_NAME = "krb-reduced-model"
FORMAT_VERSION = 1
MANIFEST_FILE = "manifest.json"
PAYLOAD_FILE = "payload.bin"
_DTYPE = np.dtype("<f8")
_REQUIRED = ("format", "version", "variant", "J", "n", "m", "f_norm2", "meta", "arrays", "sha256")
_ARRAY_NAMES = frozenset(
    {"P", "Q", "reduced_A", "reduced_f", "ls_gram", "ls_rhs", "res_gram", "res_rhs"},
)


def export_model(model: ReducedModel, path: str | Path) -> Path:
    """Write ``model`` to the directory ``path`` (created if needed)."""
    directory = Path(path)
    layout: list[dict[str, Any]] = []
    chunks: list[bytes] = []
    offset = 0
    for name, array in model.arrays().items():
        raw = np.ascontiguousarray(array, dtype=_DTYPE).tobytes()
        layout.append(
            {"name": name, "shape": list(array.shape), "offset": offset, "nbytes": len(raw)},
        )
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)

    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "variant": model.variant,
        "J": model.J,
        "n": model.n,
        "m": model.m,
        "f_norm2": model.f_norm2,
        "meta": model.meta,
        "dtype": _DTYPE.str,
        "arrays": layout,
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    try:
        directory.mkdir(parents=True, exist_ok=True)
        (directory / PAYLOAD_FILE).write_bytes(payload)
        (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    except OSError as e:
        raise PersistenceError(f"cannot write model to {directory}: {e}") from e
    logger.info("exported %s model (n=%d, m=%d) to %s", model.variant, model.n, model.m, directory)
    return directory


def _read_manifest(directory: Path) -> dict[str, Any]:
    try:
        manifest = json.loads((directory / MANIFEST_FILE).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CorruptManifestError(f"manifest in {directory} is not valid JSON: {e}") from e
    except OSError as e:
        raise PersistenceError(f"cannot read manifest in {directory}: {e}") from e
    if not isinstance(manifest, dict):
        raise CorruptManifestError("manifest must be a JSON object")
    missing = [key for key in _REQUIRED if key not in manifest]
    if missing:
        raise CorruptManifestError(f"manifest misses {', '.join(missing)}")
    if manifest["format"] != FORMAT_NAME or manifest["version"] != FORMAT_VERSION:
        raise CorruptManifestError(
            f"unsupported format {manifest['format']!r} version {manifest['version']!r}",
        )
    return manifest


def import_model(path: str | Path) -> ReducedModel:
    """Read a model written by :func:`export_model`, validating sizes and checksum.

    Raises:
        CorruptManifestError: If the manifest cannot be parsed or is incomplete.
        PayloadSizeMismatchError: If the payload length disagrees with the layout.
        HashMismatchError: If the payload checksum differs.
        ArityMismatchError: If the blocks disagree with the manifest ``J``.
        DimensionMismatchError: If the blocks disagree with each other.
    """
    directory = Path(path)
    manifest = _read_manifest(directory)
    try:
        payload = (directory / PAYLOAD_FILE).read_bytes()
    except OSError as e:
        raise PersistenceError(f"cannot read payload in {directory}: {e}") from e

    try:
        layout = [
            (
                str(entry["name"]),
                tuple(int(s) for s in entry["shape"]),
                int(entry["offset"]),
                int(entry["nbytes"]),
            )
            for entry in manifest["arrays"]
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptManifestError(f"malformed array layout: {e}") from e
    expected = sum(nbytes for *_, nbytes in layout)
    if len(payload) != expected:
        raise PayloadSizeMismatchError(f"payload has {len(payload)} bytes, layout needs {expected}")
    if hashlib.sha256(payload).hexdigest() != manifest["sha256"]:
        raise HashMismatchError(f"payload checksum mismatch in {directory}")

    arrays: dict[str, np.ndarray] = {}
    for name, shape, offset, nbytes in layout:
        if name not in _ARRAY_NAMES:
            raise CorruptManifestError(f"unknown array {name!r} in layout")
        if nbytes != int(np.prod(shape)) * _DTYPE.itemsize or offset + nbytes > len(payload):
            raise PayloadSizeMismatchError(f"array {name} of shape {shape} does not fit its slot")
        chunk = np.frombuffer(payload, dtype=_DTYPE, count=nbytes // _DTYPE.itemsize, offset=offset)
        arrays[name] = chunk.reshape(shape).astype(np.float64)

    if "P" not in arrays:
        raise CorruptManifestError("manifest has no basis P")
    if arrays["P"].shape != (manifest["n"], manifest["m"]):
        raise CorruptManifestError(
            f"basis of shape {arrays['P'].shape} but manifest says "
            f"n={manifest['n']}, m={manifest['m']}",
        )
    if manifest["variant"] not in get_args(Variant):
        raise CorruptManifestError(f"unknown variant {manifest['variant']!r}")
    try:
        J = int(manifest["J"])
    except (TypeError, ValueError) as e:
        raise CorruptManifestError(f"manifest J is not an integer: {e}") from e
    meta: BasisMeta = manifest["meta"]
    return ReducedModel(
        variant=manifest["variant"],
        J=J,
        f_norm2=float(manifest["f_norm2"]),
        meta=meta,
        **arrays,
    )
