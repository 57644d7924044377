"""Image-grid differential operators and a conjugate-gradient solver.

The gradient is the forward difference with periodic boundaries, applied to
row-major linearized pixel fields. The divergence-like operator is its exact
algebraic adjoint, so `<grad z, g> == <z, adjoint(g)>` holds to rounding, and
the (negative semidefinite) Laplacian is defined as minus adjoint-of-gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .datatypes import Dictionary, GradientPair, ImageGeometry, PhaseMap, ScalingField, SpectralCube
from .errors import DimensionError
from .validation import check_same_geometry


def forward_difference(z: np.ndarray, geom: ImageGeometry) -> GradientPair:
    """Periodic forward differences of a length-N pixel field.

    dx[i, j] = z[i, (j+1) mod K] - z[i, j]
    dy[i, j] = z[(i+1) mod M, j] - z[i, j]
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (geom.n_pixels,):
        raise DimensionError(f"field has shape {z.shape}, geometry needs ({geom.n_pixels},)")
    img = z.reshape(geom.rows, geom.cols)
    dx = np.roll(img, -1, axis=1) - img
    dy = np.roll(img, -1, axis=0) - img
    return GradientPair(geom, dx.ravel(), dy.ravel())


def divergence_adjoint(g: GradientPair, geom: ImageGeometry) -> np.ndarray:
    """Exact adjoint of `forward_difference` under the Euclidean inner product."""
    check_same_geometry(g.geometry, geom, "divergence_adjoint")
    gx = g.dx.reshape(geom.rows, geom.cols)
    gy = g.dy.reshape(geom.rows, geom.cols)
    out = (np.roll(gx, 1, axis=1) - gx) + (np.roll(gy, 1, axis=0) - gy)
    return out.ravel()


def laplacian_apply(z: np.ndarray, geom: ImageGeometry) -> np.ndarray:
    """Periodic 5-point Laplacian, defined as minus adjoint-of-gradient."""
    return -divergence_adjoint(forward_difference(z, geom), geom)


def grad_rows(X: np.ndarray, geom: ImageGeometry) -> np.ndarray:
    """Row-wise gradients of an L x N matrix, stacked as L x 2N [dx | dy].

    Identical arithmetic to calling `forward_difference` on each row.
    """
    L = X.shape[0]
    imgs = X.reshape(L, geom.rows, geom.cols)
    dx = np.roll(imgs, -1, axis=2) - imgs
    dy = np.roll(imgs, -1, axis=1) - imgs
    return np.concatenate([dx.reshape(L, -1), dy.reshape(L, -1)], axis=1)


def div_adjoint_rows(G: np.ndarray, geom: ImageGeometry) -> np.ndarray:
    """Row-wise adjoint for an L x 2N stack of gradient pairs."""
    L = G.shape[0]
    n = geom.n_pixels
    gx = G[:, :n].reshape(L, geom.rows, geom.cols)
    gy = G[:, n:].reshape(L, geom.rows, geom.cols)
    out = (np.roll(gx, 1, axis=2) - gx) + (np.roll(gy, 1, axis=1) - gy)
    return out.reshape(L, n)


@dataclass
class CgResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float


def cg_solve(
    apply: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    tol: float = 1e-6,
    max_iter: int = 50,
    x0: np.ndarray | None = None,
) -> CgResult:
    """Conjugate gradients for a symmetric positive-definite map on pixel fields.

    Stops when ||apply(x) - rhs|| <= tol * ||rhs|| (relative residual) or when
    max_iter is exhausted, in which case the best iterate is returned with
    converged=False. Non-finite values abort with an exception.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rhs = np.asarray(rhs, dtype=np.float64)
    if not np.all(np.isfinite(rhs)):
        raise ValueError("cg_solve: rhs contains non-finite values")
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return CgResult(np.zeros_like(rhs), True, 0, 0.0)

    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=np.float64)
    r = rhs - apply(x)
    p = r.copy()
    rs = float(r @ r)
    it = 0
    threshold = tol * rhs_norm
    while np.sqrt(rs) > threshold and it < max_iter:
        Ap = apply(p)
        denom = float(p @ Ap)
        if not np.isfinite(denom) or denom <= 0.0:
            raise ValueError("cg_solve: operator is not positive definite on the search direction")
        alpha = rs / denom
        x += alpha * p
        r -= alpha * Ap
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
        it += 1
    if not np.all(np.isfinite(x)):
        raise ValueError("cg_solve: iterate became non-finite")
    res = float(np.sqrt(rs))
    return CgResult(x, res <= threshold, it, res)


def mix_values(A: np.ndarray, X: np.ndarray, s: np.ndarray) -> np.ndarray:
    """A @ X scaled per pixel: column k is s[k] * A @ X[:, k]."""
    return (A @ X) * s[np.newaxis, :]


def mix_forward(A: Dictionary, X: PhaseMap, s: ScalingField) -> SpectralCube:
    """Forward model: the cube whose column k is s_k * A @ x_k."""
    check_same_geometry(X.geometry, s.geometry, "mix_forward")
    if A.n_states != X.n_states:
        raise DimensionError(
            f"dictionary has {A.n_states} states, phase map has {X.n_states}"
        )
    values = mix_values(A.spectra, X.abundances, s.values)
    return SpectralCube(X.geometry, A.grid, values)


def build_dense_operator(
    apply: Callable[[np.ndarray], np.ndarray], n: int
) -> np.ndarray:
    """Materialize a linear pixel-field operator as an n x n matrix (test aid)."""
    out = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        out[:, j] = apply(e)
    return out
