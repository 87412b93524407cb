"""Online stage: reduced solves whose cost does not depend on the full dimension."""

from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from krb.config import DEFAULT_WORKERS
from krb.exceptions import ArityMismatchError, KrbError
from krb.reductors import reductor_for

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike

    from krb.linalg import Vector
    from krb.models import ReducedModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SweepPoint:
    """Result of one grid point; ``error`` is set instead of ``coords`` on failure."""

    theta: tuple[float, ...]
    coords: Vector | None
    residual_norm: float | None
    online_us: float
    lifted: Vector | None = None
    error: KrbError | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _theta(model: ReducedModel, theta: ArrayLike) -> np.ndarray:
    t = np.asarray(theta, dtype=np.float64).ravel()
    if t.shape[0] != model.J:
        raise ArityMismatchError(f"model has {model.J} affine terms, got {t.shape[0]} coefficients")
    return t


def solve_coords(model: ReducedModel, theta: ArrayLike) -> Vector:
    """Reduced coordinates at ``theta`` without lifting."""
    return reductor_for(model.variant).solve_reduced(model, _theta(model, theta))


def online_solve(model: ReducedModel, theta: ArrayLike) -> tuple[Vector, Vector]:
    """Solve the reduced system at ``theta``.

    Returns:
        tuple[Vector, Vector]: The reduced coordinates ``c`` and the lifted
            solution ``P c``.

    Raises:
        ArityMismatchError: If ``theta`` does not have ``model.J`` entries.
        SingularReducedSystemError: If the reduced matrix is singular.
    """
    coords = solve_coords(model, theta)
    return coords, model.P @ coords


def residual_norm(model: ReducedModel, theta: ArrayLike, coords: Vector) -> float:
    """Relative residual of ``P coords`` at ``theta`` computed from reduced blocks.

    Galerkin and Petrov-Galerkin models report ``||f - A u|| / ||f||``,
    least-squares models ``||B f - B A u||_M / ||B f||_M``. The expansion
    loses about half the digits, so values below ``1e-8`` are not resolved.
    """
    t = _theta(model, theta)
    return reductor_for(model.variant).residual_norm(model, t, coords)


def _sweep_point(model: ReducedModel, theta: np.ndarray, keep_lifts: bool) -> SweepPoint:
    key = tuple(float(v) for v in theta)
    start = time.perf_counter()
    try:
        coords = solve_coords(model, theta)
    except KrbError as e:
        logger.warning("online solve failed at theta=%s: %s", key, e)
        return SweepPoint(key, None, None, 0.0, error=e)
    elapsed = (time.perf_counter() - start) * 1e6
    res = residual_norm(model, theta, coords)
    lifted = model.P @ coords if keep_lifts else None
    return SweepPoint(key, coords, res, elapsed, lifted)


def _grid(model: ReducedModel, theta_grid: Sequence[ArrayLike]) -> list[np.ndarray]:
    return [_theta(model, theta) for theta in theta_grid]


def online_sweep(
    model: ReducedModel,
    theta_grid: Sequence[ArrayLike],
    keep_lifts: bool = False,
    workers: int = DEFAULT_WORKERS,
) -> list[SweepPoint]:
    """Solve at every grid point, in grid order.

    Failures (e.g. a singular reduced system) are recorded on the point and
    the sweep continues. ``workers > 1`` dispatches through
    :func:`online_sweep_async` and must not be called from a running event loop.
    """
    grid = _grid(model, theta_grid)
    if workers <= 1:
        return [_sweep_point(model, theta, keep_lifts) for theta in grid]
    return asyncio.run(online_sweep_async(model, grid, keep_lifts, workers))


async def online_sweep_async(
    model: ReducedModel,
    theta_grid: Sequence[ArrayLike],
    keep_lifts: bool = False,
    workers: int = DEFAULT_WORKERS,
) -> list[SweepPoint]:
    """Concurrent sweep with at most ``workers`` points in flight, results in grid order."""
    grid = _grid(model, theta_grid)
    semaphore = asyncio.Semaphore(max(workers, 1))

    async def run(theta: np.ndarray) -> SweepPoint:
        async with semaphore:
            return await asyncio.to_thread(_sweep_point, model, theta, keep_lifts)

    return list(await asyncio.gather(*(run(theta) for theta in grid)))
