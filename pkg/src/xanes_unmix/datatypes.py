"""Core data containers.

Conventions used throughout the package:

* a cube is a T x N matrix (T energy bands, N pixels), band-sequential;
* pixels are linearized row-major: pixel (i, j) on an M x K image grid is
  column i*K + j;
* abundances are L x N with each column on the probability simplex;
* the per-pixel scale is a length-N nonnegative vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .validation import as_float_array, check_shape

SIMPLEX_SUM_TOL = 1e-9


@dataclass(eq=False)
class EnergyGrid:
    """Ordered photon energies (eV) shared by a cube and its dictionary."""

    energies: np.ndarray

    def __post_init__(self):
        self.energies = as_float_array(self.energies, "energies", ndim=1)
        if self.energies.size < 2:
            raise ValueError("energy grid needs at least 2 points")
        if not np.all(np.diff(self.energies) > 0):
            raise ValueError("energies must be strictly increasing")

    @property
    def n_energies(self) -> int:
        return self.energies.size

    @property
    def e_min(self) -> float:
        return float(self.energies[0])

    @property
    def e_max(self) -> float:
        return float(self.energies[-1])


@dataclass(frozen=True)
class ImageGeometry:
    """Pixel grid of the imaged field of view; linearization is row-major."""

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be >= 1")

    @property
    def n_pixels(self) -> int:
        return self.rows * self.cols

    def to_image(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z).reshape(self.rows, self.cols)


@dataclass(eq=False)
class SpectralCube:
    """Observed band stack: values[t, k] is band t at pixel k."""

    geometry: ImageGeometry
    grid: EnergyGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = as_float_array(self.values, "cube values", ndim=2)
        check_shape(
            self.values, (self.grid.n_energies, self.geometry.n_pixels), "cube values"
        )

    @property
    def n_bands(self) -> int:
        return self.grid.n_energies

    @property
    def n_pixels(self) -> int:
        return self.geometry.n_pixels

    def band_image(self, t: int) -> np.ndarray:
        return self.geometry.to_image(self.values[t])


@dataclass(eq=False)
class Dictionary:
    """Reference spectra, one column per chemical state."""

    grid: EnergyGrid
    spectra: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        self.spectra = as_float_array(self.spectra, "dictionary spectra", ndim=2)
        if self.spectra.shape[0] != self.grid.n_energies:
            raise DimensionError(
                f"dictionary has {self.spectra.shape[0]} bands, grid has {self.grid.n_energies}"
            )
        if self.spectra.shape[1] < 1:
            raise ValueError("dictionary needs at least one state")
        norms = np.linalg.norm(self.spectra, axis=0)
        if np.any(norms == 0.0):
            raise ValueError("dictionary contains an identically-zero column")
        if not self.labels:
            self.labels = tuple(f"state_{j + 1}" for j in range(self.spectra.shape[1]))
        self.labels = tuple(str(l) for l in self.labels)
        if len(self.labels) != self.spectra.shape[1]:
            raise DimensionError("label count does not match number of states")

    @property
    def n_states(self) -> int:
        return self.spectra.shape[1]


@dataclass(eq=False)
class PhaseMap:
    """Per-pixel fractional composition over states (L x N)."""

    geometry: ImageGeometry
    abundances: np.ndarray

    def __post_init__(self):
        self.abundances = as_float_array(self.abundances, "abundances", ndim=2)
        if self.abundances.shape[1] != self.geometry.n_pixels:
            raise DimensionError(
                f"abundances have {self.abundances.shape[1]} pixels, geometry has {self.geometry.n_pixels}"
            )

    @property
    def n_states(self) -> int:
        return self.abundances.shape[0]

    def state_image(self, j: int) -> np.ndarray:
        return self.geometry.to_image(self.abundances[j])

    def check_simplex(self, sum_tol: float = SIMPLEX_SUM_TOL, neg_tol: float = 1e-12) -> bool:
        """True when columns sum to 1 within sum_tol and entries >= -neg_tol."""
        sums = self.abundances.sum(axis=0)
        return bool(
            np.all(np.abs(sums - 1.0) <= sum_tol)
            and np.all(self.abundances >= -neg_tol)
        )


@dataclass(eq=False)
class ScalingField:
    """Per-pixel multiplicative scale applied to the mixed spectrum."""

    geometry: ImageGeometry
    values: np.ndarray

    def __post_init__(self):
        self.values = as_float_array(self.values, "scaling values", ndim=1)
        check_shape(self.values, (self.geometry.n_pixels,), "scaling values")

    def as_image(self) -> np.ndarray:
        return self.geometry.to_image(self.values)


@dataclass(eq=False)
class GradientPair:
    """Horizontal/vertical forward differences of one pixel field."""

    geometry: ImageGeometry
    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        self.dx = as_float_array(self.dx, "dx", ndim=1)
        self.dy = as_float_array(self.dy, "dy", ndim=1)
        n = self.geometry.n_pixels
        check_shape(self.dx, (n,), "dx")
        check_shape(self.dy, (n,), "dy")

    def stacked(self) -> np.ndarray:
        """The 2N vector [dx; dy]."""
        return np.concatenate([self.dx, self.dy])
