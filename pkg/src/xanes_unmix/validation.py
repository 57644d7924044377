"""Input validation helpers.

Small coercion/check utilities used by the data containers, the estimators
and the public functions. All numeric data is widened to float64 on entry.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError


def as_float_array(a, name: str, ndim: int | None = None) -> np.ndarray:
    """Coerce to a float64 ndarray and require finite entries."""
    arr = np.asarray(a, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_length(arr: np.ndarray, n: int, name: str) -> np.ndarray:
    if arr.shape != (n,):
        raise DimensionError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr


def check_shape(arr: np.ndarray, shape: tuple, name: str) -> np.ndarray:
    if arr.shape != shape:
        raise DimensionError(f"{name} must have shape {shape}, got {arr.shape}")
    return arr


def check_same_grid(grid_a, grid_b, what: str) -> None:
    if grid_a.n_energies != grid_b.n_energies or not np.array_equal(
        grid_a.energies, grid_b.energies
    ):
        raise DimensionError(f"{what}: energy grids differ")


def check_same_geometry(geom_a, geom_b, what: str) -> None:
    if (geom_a.rows, geom_a.cols) != (geom_b.rows, geom_b.cols):
        raise DimensionError(
            f"{what}: geometries differ ({geom_a.rows}x{geom_a.cols} vs {geom_b.rows}x{geom_b.cols})"
        )
