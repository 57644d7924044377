"""Estimator-style front end for the unmixing methods.

Thin wrappers with the scikit-learn surface (``fit``, ``get_params`` /
``set_params``, trailing-underscore attributes) so the methods compose with
ecosystem tooling (cloning, grid search over SolverConfig knobs, pipelines).
All of them fit on a SpectralCube and expose domain-typed results.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .baselines import EdgeWindows, edge50_map, edge50_reference_energies, lcf_unmix
from .datatypes import Dictionary, PhaseMap, SpectralCube
from .solver import SolverConfig, solve
from .vca import VcaConfig, vca_extract


def _ensure_cube(cube) -> SpectralCube:
    if not isinstance(cube, SpectralCube):
        raise TypeError(f"expected a SpectralCube, got {type(cube).__name__}")
    return cube


def _ensure_dictionary(d) -> Dictionary:
    if not isinstance(d, Dictionary):
        raise TypeError("a Dictionary must be supplied before fitting")
    return d


class LcfUnmixer(BaseEstimator):
    """Pixel-by-pixel fully-constrained least squares against a dictionary.

    Attributes after fit: ``abundances_`` (PhaseMap), ``converged_`` (per-pixel
    bool mask).
    """

    def __init__(self, dictionary: Dictionary | None = None):
        self.dictionary = dictionary

    def fit(self, cube: SpectralCube, y=None):
        self.abundances_, self.converged_ = lcf_unmix(
            _ensure_dictionary(self.dictionary), _ensure_cube(cube)
        )
        return self

    def transform(self, cube: SpectralCube) -> PhaseMap:
        phase, _ = lcf_unmix(_ensure_dictionary(self.dictionary), _ensure_cube(cube))
        return phase

    def fit_transform(self, cube: SpectralCube, y=None) -> PhaseMap:
        return self.fit(cube).abundances_


class Edge50Mapper(BaseEstimator):
    """Half-height-energy mapping onto two reference states.

    Attributes after fit: ``abundances_`` (PhaseMap), ``flags_`` (per-pixel
    quality mask, True where normalization degenerated or no half-height
    crossing exists), ``references_`` (half-height energies used).
    """

    def __init__(self, dictionary: Dictionary | None = None, windows: EdgeWindows | None = None):
        self.dictionary = dictionary
        self.windows = windows

    def fit(self, cube: SpectralCube, y=None):
        cube = _ensure_cube(cube)
        d = _ensure_dictionary(self.dictionary)
        win = self.windows if self.windows is not None else EdgeWindows.from_grid(cube.grid)
        refs = edge50_reference_energies(d, win)
        self.abundances_, self.flags_ = edge50_map(cube, win, refs)
        self.references_ = refs
        return self

    def fit_transform(self, cube: SpectralCube, y=None) -> PhaseMap:
        return self.fit(cube).abundances_


class RobustUnmixer(BaseEstimator):
    """ADMM unmixing under the scaled mixing model with a TV or PnP prior.

    Attributes after fit: ``abundances_`` (PhaseMap), ``scaling_``
    (ScalingField), ``diagnostics_`` (per-iteration records), ``n_iter_``,
    ``result_`` (full solver result incl. final state).
    """

    def __init__(
        self,
        dictionary: Dictionary | None = None,
        prior: str = "tv",
        lam: float = 0.01,
        rho: float = 1.0,
        max_iter: int = 100,
        re_tol: float = 0.0,
        cg_tol: float = 1e-6,
        cg_max_iter: int = 50,
        denoiser: str = "nlm",
        denoiser_params: dict | None = None,
    ):
        self.dictionary = dictionary
        self.prior = prior
        self.lam = lam
        self.rho = rho
        self.max_iter = max_iter
        self.re_tol = re_tol
        self.cg_tol = cg_tol
        self.cg_max_iter = cg_max_iter
        self.denoiser = denoiser
        self.denoiser_params = denoiser_params

    def _config(self) -> SolverConfig:
        return SolverConfig(
            lam=self.lam,
            rho=self.rho,
            max_iter=self.max_iter,
            re_tol=self.re_tol,
            cg_tol=self.cg_tol,
            cg_max_iter=self.cg_max_iter,
            prior=self.prior,
            denoiser=self.denoiser,
            denoiser_params=dict(self.denoiser_params or {}),
        )

    def fit(self, cube: SpectralCube, y=None, ground_truth: PhaseMap | np.ndarray | None = None):
        result = solve(
            _ensure_cube(cube), _ensure_dictionary(self.dictionary), self._config(), ground_truth
        )
        self.result_ = result
        self.abundances_ = result.phase_map
        self.scaling_ = result.scaling
        self.diagnostics_ = result.diagnostics
        self.n_iter_ = len(result.diagnostics)
        return self

    def fit_transform(self, cube: SpectralCube, y=None) -> PhaseMap:
        return self.fit(cube).abundances_


class VcaExtractor(BaseEstimator):
    """Endmember extraction; after fit: ``dictionary_``, ``indices_``."""

    def __init__(self, n_states: int = 2, seed: int = 0, snr_override: float | None = None):
        self.n_states = n_states
        self.seed = seed
        self.snr_override = snr_override

    def fit(self, cube: SpectralCube, y=None):
        cfg = VcaConfig(count=self.n_states, seed=self.seed, snr_override=self.snr_override)
        self.dictionary_, self.indices_ = vca_extract(_ensure_cube(cube), cfg)
        return self
