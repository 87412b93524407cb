"""Experiment configurations, presets and the offline/online/truth pipeline.

An experiment builds a problem bundle, one reduced model per pair ``(L, m)``
of instance count and Krylov steps, sweeps the parameter grid online and
compares every reduced solution with a direct solve. The run writes:

- ``errors_L<L>_m<m>.csv`` with ``mu_1..mu_d,m,rel_error,residual_norm,online_us``,
- ``summary.csv`` with the sup and mean error per ``(L, m)``,
- ``timing.csv`` with offline, online and truth seconds per ``(L, m)``,
- one SVG per ``L`` with ``log10`` errors against the grid index.
"""

from __future__ import annotations

import asyncio
import csv
import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Literal, get_args

import numpy as np

from krb.config import DEFAULT_OUTPUT_DIR, DEFAULT_WORKERS
from krb.diagnostics import error_norms
from krb.exceptions import ConfigError, UnknownPresetError
from krb.factor import TruthSolver, make_block_diagonal_preconditioner, make_exact_preconditioner
from krb.linalg import SpdWeight
from krb.models import Method, SummaryRow, TimingRow
from krb.online import online_sweep
from krb.problems.registry import generate, generators
from krb.rkbm import build_multi, build_rcgbm, build_rkbm1, build_rkbm2
from krb.utils import parse_grid

if TYPE_CHECKING:
    from collections.abc import Sequence

    from krb.factor import LinearOperatorHandle
    from krb.linalg import Vector
    from krb.models import ReducedModel
    from krb.problems.bundle import ProblemBundle

logger = logging.getLogger(__name__)

Tier = Literal["s", "m", "l"]
Preconditioner = Literal["exact", "block_diagonal"]

SINGLE_METHODS = frozenset({"rcgbm", "rkbm1", "rkbm2"})
CSV_NAME = "errors_L{L}_m{m}.csv"
SUMMARY_FILE = "summary.csv"
TIMING_FILE = "timing.csv"
CONFIG_FILE = "config.json"


@dataclass
class ExperimentConfig:
    """Everything that defines one experiment.

    ``weight`` names the matrix of the M-inner product: ``"identity"`` or a
    key of the bundle's norms (the convection-diffusion presets use the
    stiffness matrix ``"h1_semi"``). ``norm`` selects the error norm:
    ``"energy"``, ``"m_residual"`` or a key of the bundle's norms.
    ``instance_counts`` lists the values of ``L`` for the multi-instance
    methods; every ``L`` uses the first ``L`` entries of ``mu_instances``.
    """

    problem: str
    n_cells: int
    method: Method
    mu0: tuple[float, ...]
    mu_instances: list[tuple[float, ...]]
    m: list[int]
    grid: str
    norm: str = "energy"
    instance_counts: list[int] = field(default_factory=lambda: [1])
    weight: str = "identity"
    preconditioner: Preconditioner = "exact"
    seed: int = 0
    output_dir: str = DEFAULT_OUTPUT_DIR
    workers: int = DEFAULT_WORKERS
    deterministic: bool = False
    drop_tol: float | None = None

    def __post_init__(self) -> None:
        self.mu0 = tuple(float(v) for v in self.mu0)
        self.mu_instances = [tuple(float(v) for v in mu) for mu in self.mu_instances]
        self.m = [int(v) for v in self.m]
        self.instance_counts = [int(v) for v in self.instance_counts]
        self.validate()

    def validate(self) -> None:
        """Check the configuration; raises ConfigError describing the first problem found."""
        if self.problem not in generators():
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.method not in get_args(Method):
            known = ", ".join(get_args(Method))
            raise ConfigError(f"unknown method {self.method!r}; known: {known}")
        if self.preconditioner not in get_args(Preconditioner):
            raise ConfigError(f"unknown preconditioner {self.preconditioner!r}")
        if self.n_cells < 2:
            raise ConfigError(f"n_cells must be at least 2, got {self.n_cells}")
        if not self.mu_instances:
            raise ConfigError("at least one parameter instance is needed")
        if any(len(mu) != len(self.mu0) for mu in self.mu_instances):
            raise ConfigError("mu0 and the instances must have the same dimension")
        if any(np.allclose(mu, self.mu0, rtol=0.0, atol=1e-14) for mu in self.mu_instances):
            raise ConfigError(f"mu0={self.mu0} must not be one of the instances")
        if not self.m or min(self.m) < 1:
            raise ConfigError(f"m must be a nonempty list of positive counts, got {self.m}")
        if self.method in SINGLE_METHODS:
            if self.instance_counts != [1]:
                raise ConfigError(
                    f"{self.method} uses a single instance; instance_counts must be [1]",
                )
        else:
            top = len(self.mu_instances)
            if not self.instance_counts or not all(1 <= L <= top for L in self.instance_counts):
                raise ConfigError(
                    f"instance_counts must lie in 1..{top}, got {self.instance_counts}",
                )
        if self.workers < 1:
            raise ConfigError(f"workers must be positive, got {self.workers}")
        if not self.points():
            raise ConfigError(f"parameter grid {self.grid!r} is empty")

    def points(self) -> list[tuple[float, ...]]:
        return parse_grid(self.grid)

    def to_dict(self) -> dict[str, Any]:
        data = dataclasses.asdict(self)
        data["mu0"] = list(self.mu0)
        data["mu_instances"] = [list(mu) for mu in self.mu_instances]
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        """Build a configuration from a JSON-shaped mapping; unknown keys are rejected."""
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid configuration: {e}") from e

    @classmethod
    def from_json(cls, path: str | Path) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read configuration {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"configuration {path} must be a JSON object")
        return cls.from_dict(data)


# Cells per side for each tier
TIERS: dict[str, dict[str, int]] = {
    "stiffmass-rcgbm": {"s": 16, "m": 32, "l": 64},
    "convdiff-rkbm1": {"s": 64, "m": 128, "l": 256},
    "convdiff-rkbm2": {"s": 64, "m": 128, "l": 256},
    "elasticity-mrcgbm": {"s": 16, "m": 24, "l": 32},
    "pwcoeff-mrcgbm": {"s": 32, "m": 64, "l": 128},
}

_PRESETS: dict[str, dict[str, Any]] = {
    "stiffmass-rcgbm": {
        "problem": "stiffmass",
        "method": "rcgbm",
        "mu0": (1.0, 1.0),
        "mu_instances": [(1.0, 2.0)],
        "m": [5, 10, 15],
        "grid": "(1:0.4:3)^2",
        "norm": "combined",
    },
    "convdiff-rkbm1": {
        "problem": "convdiff",
        "method": "rkbm1",
        "mu0": (1.0, math.pi / 2),
        "mu_instances": [(1.0, 0.0)],
        "m": [10, 15, 20],
        "grid": "(0.4:0.4:2)x(0:2pi/5:2pi)",
        "norm": "h1_semi",
        "weight": "h1_semi",
    },
    "convdiff-rkbm2": {
        "problem": "convdiff",
        "method": "rkbm2",
        "mu0": (1.0, math.pi / 2),
        "mu_instances": [(1.0, 0.0)],
        "m": [10, 15, 20],
        "grid": "(0.4:0.4:2)x(0:2pi/5:2pi)",
        "norm": "h1_semi",
    },
    "elasticity-mrcgbm": {
        "problem": "elasticity",
        "method": "mrcgbm",
        "mu0": (1.0, 0.05),
        "mu_instances": [(1.0, 0.1), (1.0, 0.25), (1.0, 0.3)],
        "instance_counts": [1, 2, 3],
        "m": [4, 6, 8, 12, 24],
        "grid": "(1)x(0.05:0.01:0.3)",
        "norm": "energy",
        "preconditioner": "block_diagonal",
    },
    "pwcoeff-mrcgbm": {
        "problem": "pwcoeff",
        "method": "mrcgbm",
        "mu0": (1.0, 1.0, 1.0, 1.0),
        "mu_instances": [(1.0, 2.0, 3.0, 4.0), (1.0, 2.0, 1.0, 4.0), (1.0, 1.0, 2.0, 4.0)],
        "instance_counts": [1, 2, 3],
        "m": [5, 10, 15],
        "grid": "(1:1:3)^4",
        "norm": "h1_semi",
    },
}


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def preset(name: str, tier: Tier = "s", **overrides: Any) -> ExperimentConfig:
    """Configuration of a named experiment at the given mesh tier.

    Args:
        name (str): One of :func:`preset_names`.
        tier (Tier): ``"s"``, ``"m"`` or ``"l"``, selecting the mesh size.
        **overrides: Fields replacing the preset values, e.g. ``m=[10]``.

    Returns:
        ExperimentConfig: The validated configuration.

    Raises:
        UnknownPresetError: If ``name`` or ``tier`` is unknown.
    """
    if name not in _PRESETS:
        valid = ", ".join(preset_names())
        raise UnknownPresetError(f"unknown preset {name!r}; valid presets: {valid}")
    if tier not in TIERS[name]:
        raise UnknownPresetError(f"unknown tier {tier!r}; valid tiers: {', '.join(TIERS[name])}")
    data = {**_PRESETS[name], "n_cells": TIERS[name][tier], **overrides}
    return ExperimentConfig.from_dict(data)


@dataclass
class ExperimentResult:
    summary: list[SummaryRow]
    timing: list[TimingRow]
    files: list[Path]


def make_preconditioner(config: ExperimentConfig, bundle: ProblemBundle) -> LinearOperatorHandle:
    theta0 = bundle.theta(config.mu0)
    if config.preconditioner == "block_diagonal":
        if not bundle.blocks:
            raise ConfigError(f"problem {bundle.name} defines no dof blocks")
        return make_block_diagonal_preconditioner(bundle.op, theta0, bundle.blocks, bundle.spd)
    return make_exact_preconditioner(bundle.op, theta0, bundle.spd)


def make_weight(config: ExperimentConfig, bundle: ProblemBundle) -> SpdWeight | None:
    if config.weight == "identity":
        return None
    if config.weight not in bundle.norms:
        raise ConfigError(f"problem {bundle.name} has no matrix {config.weight!r} for the weight")
    return SpdWeight.from_matrix(bundle.norms[config.weight], seed=config.seed)


def build_model(
    config: ExperimentConfig,
    bundle: ProblemBundle,
    B: LinearOperatorHandle,
    M: SpdWeight | None,
    L: int,
    m: int,
) -> ReducedModel:
    """Offline stage of ``config.method`` with the first ``L`` instances and ``m`` steps."""
    thetas = [bundle.theta(mu) for mu in config.mu_instances[:L]]
    op, f = bundle.op, bundle.rhs
    match config.method:
        case "rcgbm":
            return build_rcgbm(op, f, B, thetas[0], m)
        case "rkbm1":
            return build_rkbm1(op, f, B, M, thetas[0], m)
        case "rkbm2":
            return build_rkbm2(op, f, B, thetas[0], None, m)
        case "mrcgbm" | "mrkbm1" | "mrkbm2":
            return build_multi(op, f, B, M, thetas, m, config.method, config.drop_tol)
    raise ConfigError(f"unknown method {config.method!r}")


async def _truth_async(
    solver: TruthSolver,
    thetas: Sequence[np.ndarray],
    f: Vector,
    workers: int,
) -> list[Vector]:
    semaphore = asyncio.Semaphore(workers)

    async def solve(theta: np.ndarray) -> Vector:
        async with semaphore:
            return await asyncio.to_thread(solver.solve, theta, f)

    return list(await asyncio.gather(*(solve(theta) for theta in thetas)))


def truth_solutions(
    bundle: ProblemBundle,
    thetas: Sequence[np.ndarray],
    workers: int = 1,
) -> list[Vector]:
    """Direct solutions at every ``theta``, in order, sharing one fill-reducing ordering."""
    solver = TruthSolver(bundle.op, bundle.spd)
    if workers <= 1:
        return [solver.solve(theta, bundle.rhs) for theta in thetas]
    return asyncio.run(_truth_async(solver, thetas, bundle.rhs, workers))


def relative_error(
    config: ExperimentConfig,
    bundle: ProblemBundle,
    B: LinearOperatorHandle,
    M: SpdWeight | None,
    theta: np.ndarray,
    lifted: Vector,
    truth: Vector,
) -> float | None:
    norms = {config.norm: bundle.norms[config.norm]} if config.norm in bundle.norms else None
    if config.norm not in ("energy", "m_residual") and norms is None:
        raise ConfigError(f"problem {bundle.name} has no {config.norm!r} norm")
    B_used = B if config.norm == "m_residual" else None
    errors = error_norms(lifted, truth, bundle.op, theta, bundle.rhs, B_used, M, norms)
    return errors[config.norm]


def _write_csv(path: Path, header: list[str], rows: list[list[Any]]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _fmt(value: float | None) -> str:
    return "nan" if value is None or not math.isfinite(value) else f"{value:.10e}"


def _timing_rows(timing: list[TimingRow], deterministic: bool) -> list[list[Any]]:
    if deterministic:
        return [[r["L"], r["m"], "0", "0", "0", r["points"]] for r in timing]
    rows: list[list[Any]] = []
    for r in timing:
        seconds = (r["offline_s"], r["online_s"], r["truth_s"])
        rows.append([r["L"], r["m"], *(f"{s:.6f}" for s in seconds), r["points"]])
    return rows


def run_experiment(
    config: ExperimentConfig,
    output_dir: str | Path | None = None,
) -> ExperimentResult:
    """Run the offline, online and truth stages of ``config`` and write the report files.

    Args:
        config (ExperimentConfig): The validated experiment.
        output_dir (str | Path | None): Overrides ``config.output_dir``.

    Returns:
        ExperimentResult: Summary and timing rows and every written file.

    Raises:
        ConfigError: If the configuration does not fit the problem.
        KrbError: If a factorization or an offline stage fails.
    """
    from krb.report import plot_errors

    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = generate(config.problem, config.n_cells)
    points = config.points()
    thetas = [bundle.theta(mu) for mu in points]
    logger.info(
        "%s on %s: %d dofs, %d grid points",
        config.method,
        config.problem,
        bundle.n,
        len(points),
    )

    B = make_preconditioner(config, bundle)
    M = make_weight(config, bundle)

    start = time.perf_counter()
    truths = truth_solutions(bundle, thetas, config.workers)
    truth_s = time.perf_counter() - start

    files: list[Path] = []
    summary: list[SummaryRow] = []
    timing: list[TimingRow] = []
    d = len(points[0])
    header = [f"mu_{i + 1}" for i in range(d)] + ["m", "rel_error", "residual_norm", "online_us"]
    counts = [1] if config.method in SINGLE_METHODS else config.instance_counts

    for L in counts:
        for m in config.m:
            start = time.perf_counter()
            model = build_model(config, bundle, B, M, L, m)
            offline_s = time.perf_counter() - start

            start = time.perf_counter()
            sweep = online_sweep(model, thetas, keep_lifts=True, workers=config.workers)
            online_s = time.perf_counter() - start

            rows: list[list[Any]] = []
            errors: list[float] = []
            failures = 0
            for mu, theta, point, truth in zip(points, thetas, sweep, truths, strict=True):
                error = None
                if point.ok and point.lifted is not None:
                    error = relative_error(config, bundle, B, M, theta, point.lifted, truth)
                if error is None or not math.isfinite(error):
                    failures += 1
                else:
                    errors.append(error)
                online_us = 0.0 if config.deterministic else point.online_us
                coords = [f"{v:.10g}" for v in mu]
                residual = _fmt(point.residual_norm)
                rows.append([*coords, m, _fmt(error), residual, f"{online_us:.3f}"])
            files.append(_write_csv(out / CSV_NAME.format(L=L, m=m), header, rows))

            sup_error = max(errors) if errors else math.nan
            summary.append(
                SummaryRow(
                    L=L,
                    m=m,
                    dim=model.m,
                    sup_error=sup_error,
                    mean_error=float(np.mean(errors)) if errors else math.nan,
                    failures=failures,
                ),
            )
            timing.append(
                TimingRow(
                    L=L,
                    m=m,
                    offline_s=offline_s,
                    online_s=online_s,
                    truth_s=truth_s,
                    points=len(points),
                ),
            )
            logger.info("L=%d m=%d dim=%d sup error %.4e", L, m, model.m, sup_error)
            if failures:
                logger.warning("L=%d m=%d: %d points without a reduced solution", L, m, failures)

    summary_rows = [
        [r["L"], r["m"], r["dim"], _fmt(r["sup_error"]), _fmt(r["mean_error"]), r["failures"]]
        for r in summary
    ]
    files.append(_write_csv(out / SUMMARY_FILE, list(SummaryRow.__annotations__), summary_rows))
    timing_rows = _timing_rows(timing, config.deterministic)
    files.append(_write_csv(out / TIMING_FILE, list(TimingRow.__annotations__), timing_rows))
    (out / CONFIG_FILE).write_text(json.dumps(config.to_dict(), indent=2), encoding="utf-8")
    files.append(out / CONFIG_FILE)
    files.extend(plot_errors(out))
    return ExperimentResult(summary=summary, timing=timing, files=files)


def read_summary(path: str | Path) -> list[SummaryRow]:
    """Parse a ``summary.csv`` written by :func:`run_experiment`."""
    with Path(path).open(newline="", encoding="utf-8") as handle:
        return [
            SummaryRow(
                L=int(row["L"]),
                m=int(row["m"]),
                dim=int(row["dim"]),
                sup_error=float(row["sup_error"]),
                mean_error=float(row["mean_error"]),
                failures=int(row["failures"]),
            )
            for row in csv.DictReader(handle)
        ]
