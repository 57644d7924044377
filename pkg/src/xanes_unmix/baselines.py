"""Conventional chemical-state mapping baselines.

Two pixel-separable methods:

* edge-50: normalize each pixel spectrum against line fits in pre/post-edge
  windows, locate the energy where the normalized curve crosses 0.5, and map
  that energy linearly onto the fractions of two reference states;
* LCF: fully-constrained least squares (nonnegative, sum-to-one) of each
  pixel spectrum against the dictionary columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datatypes import Dictionary, EnergyGrid, ImageGeometry, PhaseMap, SpectralCube
from .errors import DimensionError
from .validation import check_same_grid

DEGENERATE_EPS = 1e-6
FCLS_STOP_DECREASE = 1e-14
FCLS_STOP_STEP = 1e-9
FCLS_MAX_ITER = 5000


@dataclass
class EdgeWindows:
    """Pre- and post-edge energy intervals used for the line-fit normalization."""

    pre_edge: tuple[float, float]
    post_edge: tuple[float, float]

    def __post_init__(self):
        lo_pre, hi_pre = self.pre_edge
        lo_post, hi_post = self.post_edge
        if not (lo_pre < hi_pre and lo_post < hi_post):
            raise ValueError("windows must be nonempty intervals (lo < hi)")
        if hi_pre >= lo_post:
            raise ValueError("pre-edge window must lie entirely below the post-edge window")

    @classmethod
    def from_grid(cls, grid: EnergyGrid, pre_frac: float = 0.25, post_frac: float = 0.25) -> "EdgeWindows":
        """Default windows: the first pre_frac / last post_frac of the grid span."""
        span = grid.e_max - grid.e_min
        return cls(
            pre_edge=(grid.e_min, grid.e_min + pre_frac * span),
            post_edge=(grid.e_max - post_frac * span, grid.e_max),
        )

    def indices(self, grid: EnergyGrid) -> tuple[np.ndarray, np.ndarray]:
        e = grid.energies
        pre = np.flatnonzero((e >= self.pre_edge[0]) & (e <= self.pre_edge[1]))
        post = np.flatnonzero((e >= self.post_edge[0]) & (e <= self.post_edge[1]))
        if pre.size < 2 or post.size < 2:
            raise ValueError("each window must contain at least 2 grid energies")
        return pre, post


@dataclass(eq=False)
class Edge50References:
    """Half-height energies of the reference spectra, one per state."""

    e50: np.ndarray

    def __post_init__(self):
        self.e50 = np.asarray(self.e50, dtype=np.float64).ravel()
        if not np.all(np.isfinite(self.e50)):
            raise ValueError("reference half-height energies must be finite")


def _line_fit_eval(energies_win: np.ndarray, samples: np.ndarray, energies_all: np.ndarray) -> np.ndarray:
    """Least-squares line through (energies_win, samples) evaluated on energies_all.

    samples is (W, N): one column per pixel; returns (T, N).
    """
    design = np.column_stack([np.ones_like(energies_win), energies_win])
    coef, *_ = np.linalg.lstsq(design, samples, rcond=None)
    design_all = np.column_stack([np.ones_like(energies_all), energies_all])
    return design_all @ coef


def normalize_spectra(
    cube: SpectralCube, win: EdgeWindows, eps: float = DEGENERATE_EPS
) -> tuple[SpectralCube, np.ndarray]:
    """Pre/post-edge normalization of every pixel spectrum.

    Fits a line to each window, then maps raw values through
    (raw - pre_line) / (post_line - pre_line). Pixels where the denominator
    drops to eps or below anywhere on the grid are flagged and set to the
    constant 0.5 so downstream maps stay finite.

    Returns (normalized cube, degenerate-pixel mask).
    """
    pre_idx, post_idx = win.indices(cube.grid)
    e = cube.grid.energies
    pre_line = _line_fit_eval(e[pre_idx], cube.values[pre_idx, :], e)
    post_line = _line_fit_eval(e[post_idx], cube.values[post_idx, :], e)
    denom = post_line - pre_line
    degenerate = np.any(denom <= eps, axis=0)
    safe = np.where(denom <= eps, 1.0, denom)
    normalized = (cube.values - pre_line) / safe
    normalized[:, degenerate] = 0.5
    return SpectralCube(cube.geometry, cube.grid, normalized), degenerate


def edge50_energy(spectrum: np.ndarray, grid: EnergyGrid) -> tuple[float, bool]:
    """Energy of the first upward 0.5-crossing of a normalized spectrum.

    Linearly interpolates between the bracketing samples. When the curve never
    crosses upward, returns the grid midpoint with crossed=False.
    """
    mu = np.asarray(spectrum, dtype=np.float64)
    if mu.shape != (grid.n_energies,):
        raise DimensionError("spectrum length does not match grid")
    if not np.all(np.isfinite(mu)):
        raise ValueError("spectrum contains non-finite values")
    e = grid.energies
    below = mu[:-1] < 0.5
    above = mu[1:] >= 0.5
    hits = np.flatnonzero(below & above)
    if hits.size == 0:
        return 0.5 * (grid.e_min + grid.e_max), False
    i = int(hits[0])
    frac = (0.5 - mu[i]) / (mu[i + 1] - mu[i])
    return float(e[i] + frac * (e[i + 1] - e[i])), True


def edge50_reference_energies(A: Dictionary, win: EdgeWindows) -> Edge50References:
    """Half-height energies of the dictionary columns (normalized first)."""
    ref_cube = SpectralCube(
        geometry=ImageGeometry(1, A.n_states),
        grid=A.grid,
        values=A.spectra,
    )
    normalized, degenerate = normalize_spectra(ref_cube, win)
    if np.any(degenerate):
        raise ValueError("a reference spectrum is degenerate under the chosen windows")
    e50 = np.empty(A.n_states)
    for j in range(A.n_states):
        e50[j], crossed = edge50_energy(normalized.values[:, j], A.grid)
        if not crossed:
            raise ValueError(f"reference spectrum {j} never crosses half height")
    return Edge50References(e50)


def edge50_map(
    cube: SpectralCube, win: EdgeWindows, refs: Edge50References
) -> tuple[PhaseMap, np.ndarray]:
    """Two-state fraction map from per-pixel half-height energies.

    Only defined for exactly two reference states: the fraction of state 2 is
    the position of the pixel's half-height energy between the two reference
    energies, clamped to [0, 1].

    Returns (phase map, per-pixel quality flags: True where the pixel was
    degenerate under normalization or never crossed half height).
    """
    if refs.e50.size != 2:
        raise ValueError("edge-50 fraction mapping is defined for exactly 2 states")
    if refs.e50[0] == refs.e50[1]:
        raise ValueError("reference half-height energies are indistinguishable")
    normalized, degenerate = normalize_spectra(cube, win)
    n = cube.n_pixels
    e50 = np.empty(n)
    flagged = degenerate.copy()
    for k in range(n):
        e50[k], crossed = edge50_energy(normalized.values[:, k], cube.grid)
        if not crossed:
            flagged[k] = True
    frac2 = np.clip((e50 - refs.e50[0]) / (refs.e50[1] - refs.e50[0]), 0.0, 1.0)
    abundances = np.vstack([1.0 - frac2, frac2])
    return PhaseMap(cube.geometry, abundances), flagged


def project_simplex_columns(V: np.ndarray) -> np.ndarray:
    """Euclidean projection of every column of V onto the probability simplex."""
    L, n = V.shape
    U = np.sort(V, axis=0)[::-1, :]
    css = np.cumsum(U, axis=0) - 1.0
    ind = np.arange(1, L + 1)[:, np.newaxis]
    cond = U - css / ind > 0
    rho = L - np.argmax(cond[::-1, :], axis=0) - 1
    rho = np.where(cond.any(axis=0), rho, 0)
    theta = css[rho, np.arange(n)] / (rho + 1)
    return np.maximum(V - theta[np.newaxis, :], 0.0)


def _fcls_batch(
    A: np.ndarray,
    Y: np.ndarray,
    max_iter: int = FCLS_MAX_ITER,
    stop_decrease: float = FCLS_STOP_DECREASE,
    stop_step: float = FCLS_STOP_STEP,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Projected-gradient FCLS on every column of Y at once.

    Fixed step 1/||A^T A||_2. A column freezes once its objective decrease
    and its iterate movement are both tiny (the objective alone plateaus at
    float resolution while x can still be ~1e-6 away for ill-conditioned
    dictionaries). Frozen columns stop updating, so results match a
    column-at-a-time run exactly.

    Returns (X, converged mask, iterations used).
    """
    T, L = A.shape
    n = Y.shape[1]
    AtA = A.T @ A
    AtY = A.T @ Y
    lip = float(np.linalg.eigvalsh(AtA)[-1])
    if lip <= 0:
        raise ValueError("dictionary gram matrix is not positive")
    step = 1.0 / lip

    X = np.full((L, n), 1.0 / L)
    const = 0.5 * np.einsum("ij,ij->j", Y, Y)

    def objective(Xc, cols):
        quad = 0.5 * np.einsum("ij,ij->j", Xc, AtA @ Xc)
        lin = np.einsum("ij,ij->j", Xc, AtY[:, cols])
        return const[cols] - lin + quad

    active = np.arange(n)
    obj = objective(X, active)
    it = 0
    while active.size and it < max_iter:
        Xa = X[:, active]
        G = AtA @ Xa - AtY[:, active]
        Xa_new = project_simplex_columns(Xa - step * G)
        X[:, active] = Xa_new
        obj_new = objective(Xa_new, active)
        moved = np.max(np.abs(Xa_new - Xa), axis=0)
        done = ((obj - obj_new) < stop_decrease) & (moved < stop_step)
        obj = obj_new[~done]
        active = active[~done]
        it += 1
    converged = np.ones(n, dtype=bool)
    converged[active] = False
    return X, converged, it


def fcls_solve(A: Dictionary | np.ndarray, y: np.ndarray) -> tuple[np.ndarray, bool]:
    """Simplex-constrained least-squares weights for one spectrum.

    Returns (weights, converged). When the iteration budget runs out the best
    feasible iterate is returned with converged=False.
    """
    Aarr = A.spectra if isinstance(A, Dictionary) else np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != Aarr.shape[0]:
        raise DimensionError("spectrum length does not match dictionary")
    if not np.all(np.isfinite(y)):
        raise ValueError("spectrum contains non-finite values")
    X, conv, _ = _fcls_batch(Aarr, y[:, np.newaxis])
    return X[:, 0], bool(conv[0])


def lcf_unmix(A: Dictionary, Y: SpectralCube) -> tuple[PhaseMap, np.ndarray]:
    """Pixel-by-pixel FCLS against the dictionary.

    Returns (phase map, per-pixel converged mask).
    """
    check_same_grid(A.grid, Y.grid, "lcf_unmix")
    X, converged, _ = _fcls_batch(A.spectra, Y.values)
    return PhaseMap(Y.geometry, X), converged
