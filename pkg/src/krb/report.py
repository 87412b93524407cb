"""SVG figures of the per-point errors written by an experiment run."""

from __future__ import annotations

import csv
import logging
import math
import re
from pathlib import Path

import matplotlib as mpl

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from krb.exceptions import PersistenceError  # noqa: E402

logger = logging.getLogger(__name__)

_CSV_PATTERN = re.compile(r"^errors_L(?P<L>\d+)_m(?P<m>\d+)\.csv$")
FIGURE_NAME = "errors_L{L}.svg"


def read_errors(path: str | Path) -> list[float]:
    """``rel_error`` column of a per-point CSV; failed points are ``nan``."""
    try:
        with Path(path).open(newline="", encoding="utf-8") as handle:
            return [float(row["rel_error"]) for row in csv.DictReader(handle)]
    except (OSError, KeyError, ValueError) as e:
        raise PersistenceError(f"cannot read errors from {path}: {e}") from e


def collect(directory: str | Path) -> dict[int, dict[int, list[float]]]:
    """Errors by ``L`` and then ``m`` for every per-point CSV in ``directory``."""
    runs: dict[int, dict[int, list[float]]] = {}
    for path in sorted(Path(directory).iterdir()):
        match = _CSV_PATTERN.match(path.name)
        if match is None:
            continue
        L, m = int(match["L"]), int(match["m"])
        runs.setdefault(L, {})[m] = read_errors(path)
    return runs


def plot_errors(directory: str | Path) -> list[Path]:
    """Draw ``log10`` relative errors against the grid index, one figure per ``L``.

    Args:
        directory (str | Path): An experiment output directory.

    Returns:
        list[Path]: The written SVG files.

    Raises:
        PersistenceError: If the directory holds no per-point CSV.
    """
    directory = Path(directory)
    runs = collect(directory)
    if not runs:
        raise PersistenceError(f"no errors_L*_m*.csv files in {directory}")

    written: list[Path] = []
    with mpl.rc_context({"svg.hashsalt": "krb", "svg.fonttype": "none"}):
        for L in sorted(runs):
            fig, ax = plt.subplots(figsize=(7.0, 4.0))
            for m in sorted(runs[L]):
                values = [math.log10(e) if e > 0.0 else math.nan for e in runs[L][m]]
                ax.plot(range(1, len(values) + 1), values, marker="o", markersize=3, label=f"m={m}")
            ax.set_xlabel("parameter index (lexicographic)")
            ax.set_ylabel("log10 relative error")
            ax.set_title(f"L={L}")
            ax.grid(visible=True, alpha=0.3)
            ax.legend()
            target = directory / FIGURE_NAME.format(L=L)
            fig.savefig(target, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(target)
            logger.info("wrote %s", target)
    return written
