"""Pluggable image denoisers for the plug-and-play proximal step.

A denoiser is a callable (image, sigma, **params) -> image operating on 2-D
arrays, where sigma is the std of the additive Gaussian noise to remove. All
bundled denoisers use periodic boundaries, matching the gradient operators,
so both prior branches of the solver see the same image topology.

External denoisers (e.g. learned ones) plug in through `register_denoiser`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import DenoiserError

DenoiserFn = Callable[..., np.ndarray]


@dataclass
class DenoiserSpec:
    """Denoiser id plus its keyword parameters."""

    id: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        radius_keys = ("radius", "patch_radius", "search_radius")
        for key in radius_keys:
            if key in self.params and self.params[key] < 0:
                raise ValueError(f"{key} must be >= 0")
        pr = self.params.get("patch_radius")
        sr = self.params.get("search_radius")
        if pr is not None and sr is not None and pr > sr:
            raise ValueError("nlm patch radius must not exceed the search radius")


def identity_denoiser(image: np.ndarray, sigma: float) -> np.ndarray:
    return np.array(image, dtype=np.float64)


def gaussian_denoiser(image: np.ndarray, sigma: float, strength: float = 1.0) -> np.ndarray:
    """Periodic convolution with a normalized Gaussian, std = strength * sigma."""
    std = strength * sigma
    if std <= 0:
        return np.array(image, dtype=np.float64)
    return ndimage.gaussian_filter(np.asarray(image, dtype=np.float64), std, mode="wrap")


def median_denoiser(image: np.ndarray, sigma: float, radius: int = 1) -> np.ndarray:
    """Square-window median; window side 2*radius + 1, periodic boundary."""
    if radius == 0:
        return np.array(image, dtype=np.float64)
    return ndimage.median_filter(
        np.asarray(image, dtype=np.float64), size=2 * int(radius) + 1, mode="wrap"
    )


def nlm_denoiser(
    image: np.ndarray,
    sigma: float,
    patch_radius: int = 1,
    search_radius: int = 5,
    strength: float = 1.0,
) -> np.ndarray:
    """Non-local means with periodic boundaries.

    Patch distances are patch-mean squared differences; the candidate at
    offset (di, dj) gets weight exp(-max(d^2 - 2*sigma^2, 0) / h^2) with
    h = strength * sigma, and the output is the weight-normalized average,
    so each pixel is a convex combination of input values.
    """
    img = np.asarray(image, dtype=np.float64)
    h = strength * sigma
    if h <= 0:
        return img.copy()
    h2 = h * h
    bias = 2.0 * sigma * sigma
    patch_size = 2 * int(patch_radius) + 1
    num = np.zeros_like(img)
    den = np.zeros_like(img)
    for di in range(-search_radius, search_radius + 1):
        for dj in range(-search_radius, search_radius + 1):
            shifted = np.roll(img, (-di, -dj), axis=(0, 1))
            diff2 = (img - shifted) ** 2
            d2 = ndimage.uniform_filter(diff2, size=patch_size, mode="wrap")
            w = np.exp(-np.maximum(d2 - bias, 0.0) / h2)
            num += w * shifted
            den += w
    return num / den


_BUNDLED: dict[str, DenoiserFn] = {
    "identity": identity_denoiser,
    "gaussian": gaussian_denoiser,
    "median": median_denoiser,
    "nlm": nlm_denoiser,
}

_REGISTRY: dict[str, DenoiserFn] = dict(_BUNDLED)


def register_denoiser(denoiser_id: str, implementation: DenoiserFn) -> None:
    """Add a denoiser under a new id; duplicate ids are refused."""
    if denoiser_id in _REGISTRY:
        raise DenoiserError(f"denoiser id already registered: {denoiser_id!r}")
    _REGISTRY[denoiser_id] = implementation


def unregister_denoiser(denoiser_id: str) -> None:
    """Remove a previously registered (non-bundled) denoiser."""
    if denoiser_id in _BUNDLED:
        raise DenoiserError(f"cannot unregister bundled denoiser {denoiser_id!r}")
    _REGISTRY.pop(denoiser_id, None)


def get_denoiser(denoiser_id: str) -> DenoiserFn:
    try:
        return _REGISTRY[denoiser_id]
    except KeyError:
        raise DenoiserError(
            f"unknown denoiser id: {denoiser_id!r} (registered: {sorted(_REGISTRY)})"
        ) from None


def available_denoisers() -> list[str]:
    return sorted(_REGISTRY)


def denoise(image: np.ndarray, sigma: float, spec: DenoiserSpec) -> np.ndarray:
    """Apply the denoiser named by spec to a 2-D image."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("denoise expects a 2-D image")
    fn = get_denoiser(spec.id)
    return fn(img, sigma, **spec.params)
