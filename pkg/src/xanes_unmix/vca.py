"""Vertex component analysis: extract reference spectra from a cube.

Classic pure-pixel endmember extraction: estimate the SNR, project the data
onto an L-dimensional subspace (projectively for clean data, affinely for
noisy data), then repeatedly pick the pixel with the largest projection onto
a random direction orthogonal to the endmembers found so far. The returned
spectra are actual pixel columns of the cube.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datatypes import Dictionary, SpectralCube
from .errors import VcaRankError


@dataclass
class VcaConfig:
    count: int
    seed: int = 0
    snr_override: float | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")


def spectral_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Angle in radians between two spectra; scale invariant."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("spectral_angle requires nonzero vectors")
    return float(np.arccos(np.clip((a @ b) / (na * nb), -1.0, 1.0)))


def estimate_snr(Y: np.ndarray, count: int) -> float:
    """SNR (dB) estimate from the energy split between the count-dimensional
    principal subspace of the mean-removed data and its complement."""
    T, n = Y.shape
    mean = Y.mean(axis=1, keepdims=True)
    Y0 = Y - mean
    u, _, _ = np.linalg.svd(Y0 @ Y0.T / n, hermitian=True)
    proj = u[:, :count].T @ Y0
    p_y = float(np.sum(Y * Y)) / n
    p_x = float(np.sum(proj * proj)) / n + float(mean.ravel() @ mean.ravel())
    denom = p_y - p_x
    num = p_x - (count / T) * p_y
    if denom <= 0.0:
        return np.inf
    if num <= 0.0:
        return 0.0
    return float(10.0 * np.log10(num / denom))


def _data_rank(Y: np.ndarray, rel_tol: float = 1e-9) -> int:
    sv = np.linalg.svd(Y, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rel_tol * sv[0]))


def vca_extract(Y: SpectralCube, cfg: VcaConfig) -> tuple[Dictionary, np.ndarray]:
    """Extract cfg.count endmembers; deterministic given cfg.seed.

    Returns (dictionary of selected pixel spectra, their pixel indices).
    Raises VcaRankError when the data spans fewer independent directions than
    requested.
    """
    data = Y.values
    T, n = data.shape
    L = cfg.count
    if L > min(T, n):
        raise ValueError(f"count must be <= min(bands, pixels) = {min(T, n)}")
    rank = _data_rank(data)
    if rank < L:
        raise VcaRankError(
            f"cube spans only {rank} independent directions, {L} requested"
        )
    rng = np.random.default_rng(cfg.seed)

    if L == 1:
        u, _, _ = np.linalg.svd(data @ data.T / n, hermitian=True)
        proj = u[:, 0] @ data
        k = int(np.argmax(np.abs(proj)))
        indices = np.array([k])
        spectra = data[:, indices].copy()
        return Dictionary(Y.grid, spectra, ("endmember_1",)), indices

    snr = cfg.snr_override if cfg.snr_override is not None else estimate_snr(data, L)
    snr_threshold = 15.0 + 10.0 * np.log10(L)

    if snr > snr_threshold:
        # Projective projection: keep L dimensions, scale each pixel onto the
        # hyperplane through the data mean direction.
        u, _, _ = np.linalg.svd(data @ data.T / n, hermitian=True)
        x = u[:, :L].T @ data
        mean_dir = x.mean(axis=1)
        denom = mean_dir @ x
        y = x / denom[np.newaxis, :]
    else:
        # Affine projection: mean-removed (L-1)-dimensional subspace plus a
        # constant coordinate.
        mean = data.mean(axis=1, keepdims=True)
        data0 = data - mean
        u, _, _ = np.linalg.svd(data0 @ data0.T / n, hermitian=True)
        x = u[:, : L - 1].T @ data0
        c = float(np.max(np.linalg.norm(x, axis=0)))
        y = np.vstack([x, np.full((1, n), c)])

    simplex = np.zeros((L, L))
    simplex[-1, 0] = 1.0
    indices = np.empty(L, dtype=int)
    for i in range(L):
        w = rng.random(L)
        f = w - simplex @ (np.linalg.pinv(simplex) @ w)
        f_norm = np.linalg.norm(f)
        if f_norm == 0.0:
            raise VcaRankError("selected endmembers already span the search space")
        f /= f_norm
        proj = f @ y
        k = int(np.argmax(np.abs(proj)))
        indices[i] = k
        simplex[:, i] = y[:, k]

    spectra = data[:, indices].copy()
    labels = tuple(f"endmember_{j + 1}" for j in range(L))
    return Dictionary(Y.grid, spectra, labels), indices
