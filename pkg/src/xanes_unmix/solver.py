"""Robust unmixing of a cube against a dictionary, with per-pixel scaling.

The data model is Y = A X diag(s) + noise, with X columnwise on the simplex
and s >= 0. The estimate minimizes

    0.5 ||Y - A X diag(s)||_F^2 + lambda * prior(X)   s.t.  X >= 0, 1'X = 1, s >= 0

by a multi-block ADMM over splits M = X diag(s), u_j = grad(x_j) (TV prior)
or u_j = x_j (plug-and-play prior), W = X, t = s, with one scaled dual per
split. Each outer iteration runs, in order: the X solve, column
normalization, the closed-form s and M solves, the prior proximal step,
the nonnegativity projections, then the dual ascent steps.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .baselines import lcf_unmix
from .datatypes import Dictionary, ImageGeometry, PhaseMap, ScalingField, SpectralCube
from .denoisers import DenoiserSpec, denoise, get_denoiser
from .errors import DenoiserError, DimensionError
from .operators import cg_solve, div_adjoint_rows, grad_rows, mix_values
from .validation import check_same_grid

PRIOR_TV = "tv"
PRIOR_PNP = "pnp"


@dataclass
class SolverConfig:
    """Knobs for one solver run.

    lam weighs the spatial prior and is what moves reconstruction quality;
    rho is the penalty shared by all four splits and mainly changes how
    fast the duals settle. re_tol > 0 enables an early exit on the dual
    successive-difference energy; the default stops on the iteration
    budget alone.
    """

    lam: float = 0.01
    rho: float = 1.0
    max_iter: int = 100
    re_tol: float = 0.0
    cg_tol: float = 1e-6
    cg_max_iter: int = 50
    prior: str = PRIOR_TV
    denoiser: str = "nlm"
    denoiser_params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.lam <= 0:
            raise ValueError("lam must be > 0")
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.prior not in (PRIOR_TV, PRIOR_PNP):
            raise ValueError(f"unknown prior {self.prior!r} (expected 'tv' or 'pnp')")
        if self.prior == PRIOR_PNP:
            get_denoiser(self.denoiser)  # fail fast before iterating
            DenoiserSpec(self.denoiser, dict(self.denoiser_params))

    def denoiser_spec(self) -> DenoiserSpec:
        return DenoiserSpec(self.denoiser, dict(self.denoiser_params))


@dataclass(eq=False)
class SolverState:
    """All primal, auxiliary and dual blocks of the splitting scheme.

    U and D are L x 2N (stacked per-row gradient pairs) for the TV prior and
    L x N (per-row images) for the plug-and-play prior.
    """

    geometry: ImageGeometry
    prior: str
    X: np.ndarray
    s: np.ndarray
    M: np.ndarray
    U: np.ndarray
    W: np.ndarray
    t: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray
    g: np.ndarray

    def blocks(self) -> tuple[np.ndarray, ...]:
        return (self.X, self.s, self.M, self.U, self.W, self.t, self.C, self.D, self.E, self.g)

    def duals(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (self.C, self.D, self.E, self.g)

    def copy(self) -> "SolverState":
        return SolverState(
            self.geometry, self.prior, *(b.copy() for b in self.blocks())
        )


@dataclass
class KktResiduals:
    """Norms of the eight first-order optimality equations of the splitting."""

    m_split: float
    u_split: float
    w_split: float
    t_split: float
    x_stationarity: float
    s_stationarity: float
    m_stationarity: float
    u_subgradient: float

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.m_split,
            self.u_split,
            self.w_split,
            self.t_split,
            self.x_stationarity,
            self.s_stationarity,
            self.m_stationarity,
            self.u_subgradient,
        )


@dataclass
class DiagnosticsRecord:
    iter: int
    re: float
    objective: float
    kkt: KktResiduals
    rmse_vs_gt: float | None
    cg_iters: int
    cg_converged: bool = True


@dataclass
class SolverResult:
    phase_map: PhaseMap
    scaling: ScalingField
    diagnostics: list[DiagnosticsRecord]
    state: SolverState
    converged: bool
    error: str | None = None


def init_state(Y: SpectralCube, A: Dictionary, cfg: SolverConfig) -> SolverState:
    """Warm start: X from the LCF baseline, unit scaling, zero duals."""
    check_same_grid(A.grid, Y.grid, "init_state")
    geom = Y.geometry
    phase, _ = lcf_unmix(A, Y)
    X = phase.abundances
    n = geom.n_pixels
    s = np.ones(n)
    M = X * s[np.newaxis, :]
    if cfg.prior == PRIOR_TV:
        U = grad_rows(X, geom)
    else:
        U = X.copy()
    W = X.copy()
    t = s.copy()
    return SolverState(
        geometry=geom,
        prior=cfg.prior,
        X=X,
        s=s,
        M=M,
        U=U,
        W=W,
        t=t,
        C=np.zeros_like(X),
        D=np.zeros_like(U),
        E=np.zeros_like(X),
        g=np.zeros(n),
    )


def update_x_tv(
    state: SolverState, geom: ImageGeometry, cfg: SolverConfig
) -> tuple[np.ndarray, int, bool]:
    """Row-wise CG solve of x_j (diag(s)^2 + grad'grad + I) = rhs_j.

    rhs_j collects the scaled M-split, this row's own gradient split pulled
    back through the adjoint, and the nonnegativity split. Warm-started from
    the previous iterate. Returns (X, total CG iterations, all-rows-converged).
    """
    s = state.s
    s2 = s * s
    rhs = (state.M - state.C) * s[np.newaxis, :]
    rhs += div_adjoint_rows(state.U - state.D, geom)
    rhs += state.W - state.E

    rows, cols = geom.rows, geom.cols

    def apply(v: np.ndarray) -> np.ndarray:
        img = v.reshape(rows, cols)
        gx = np.roll(img, -1, axis=1) - img
        gy = np.roll(img, -1, axis=0) - img
        lap = (np.roll(gx, 1, axis=1) - gx) + (np.roll(gy, 1, axis=0) - gy)
        return s2 * v + lap.ravel() + v

    X = np.empty_like(state.X)
    total = 0
    all_ok = True
    for j in range(state.X.shape[0]):
        res = cg_solve(apply, rhs[j], tol=cfg.cg_tol, max_iter=cfg.cg_max_iter, x0=state.X[j])
        X[j] = res.x
        total += res.iterations
        all_ok = all_ok and res.converged
    return X, total, all_ok


def update_x_pnp(state: SolverState) -> np.ndarray:
    """Closed-form X solve for the plug-and-play branch: divide column k by s_k^2 + 2."""
    s = state.s
    numerator = (state.M - state.C) * s[np.newaxis, :] + (state.U - state.D) + (state.W - state.E)
    return numerator / (s * s + 2.0)[np.newaxis, :]


def normalize_columns(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Divide each column by its entry sum; near-zero sums fall back to uniform.

    Returns (normalized X, mask of fallback columns).
    """
    sums = X.sum(axis=0)
    degenerate = np.abs(sums) < 1e-12
    safe = np.where(degenerate, 1.0, sums)
    out = X / safe[np.newaxis, :]
    if np.any(degenerate):
        out[:, degenerate] = 1.0 / X.shape[0]
    return out, degenerate


def update_s(state: SolverState) -> np.ndarray:
    """Per-pixel closed-form scale: the s-subproblem decouples over pixels."""
    X = state.X
    num = np.einsum("ij,ij->j", X, state.M - state.C) + state.t - state.g
    den = np.einsum("ij,ij->j", X, X) + 1.0
    return num / den


class MSystem:
    """The L x L system (A'A + rho I), factored once per run and reused."""

    def __init__(self, A: np.ndarray, rho: float):
        L = A.shape[1]
        self.rho = rho
        self.cho = cho_factor(A.T @ A + rho * np.eye(L))

    def solve(self, B: np.ndarray) -> np.ndarray:
        return cho_solve(self.cho, B)


def update_m(state: SolverState, system: MSystem, AtY: np.ndarray) -> np.ndarray:
    """Closed-form mixed-signal solve: (A'A + rho I) M = A'Y + rho(X diag(s) + C)."""
    rho = system.rho
    rhs = AtY + rho * (state.X * state.s[np.newaxis, :] + state.C)
    return system.solve(rhs)


def shrink(v: np.ndarray | float, kappa: float) -> np.ndarray | float:
    """Elementwise soft threshold: sign(v) * max(|v| - kappa, 0)."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    v = np.asarray(v, dtype=np.float64)
    out = np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)
    return out if out.ndim else float(out)


def update_u_tv(state: SolverState, lam: float, rho: float) -> np.ndarray:
    """Soft-threshold the per-row gradients plus duals at lambda/rho."""
    V = grad_rows(state.X, state.geometry) + state.D
    return np.asarray(shrink(V, lam / rho))


def update_u_pnp(
    state: SolverState, denoiser: DenoiserSpec, lam: float, rho: float
) -> np.ndarray:
    """Denoise each row image of X + D at noise level sqrt(lambda/rho)."""
    sigma = float(np.sqrt(lam / rho))
    geom = state.geometry
    V = state.X + state.D
    U = np.empty_like(V)
    for j in range(V.shape[0]):
        img = V[j].reshape(geom.rows, geom.cols)
        try:
            U[j] = np.asarray(denoise(img, sigma, denoiser), dtype=np.float64).ravel()
        except Exception as exc:
            raise DenoiserError(f"denoiser {denoiser.id!r} failed on row {j}: {exc}") from exc
    return U


def project_splits(state: SolverState) -> tuple[np.ndarray, np.ndarray]:
    """Nonnegativity projections of the split variables: W and t."""
    return np.maximum(state.X + state.E, 0.0), np.maximum(state.s + state.g, 0.0)


def split_residuals(
    state: SolverState,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Constraint residuals feeding the dual ascent steps."""
    r_c = state.X * state.s[np.newaxis, :] - state.M
    if state.prior == PRIOR_TV:
        r_d = grad_rows(state.X, state.geometry) - state.U
    else:
        r_d = state.X - state.U
    r_e = state.X - state.W
    r_g = state.s - state.t
    return r_c, r_d, r_e, r_g


def update_duals(
    state: SolverState,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Dual ascent: add each split's residual to its multiplier."""
    r_c, r_d, r_e, r_g = split_residuals(state)
    return state.C + r_c, state.D + r_d, state.E + r_e, state.g + r_g


def relative_error(prev: Sequence[np.ndarray], cur: Sequence[np.ndarray]) -> float:
    """Summed squared Frobenius norms of the four dual successive differences."""
    total = 0.0
    for p, c in zip(prev, cur):
        d = c - p
        total += float(np.sum(d * d))
    return total


def objective_value(
    Y: np.ndarray, A: np.ndarray, X: np.ndarray, s: np.ndarray,
    lam: float, prior: str, geom: ImageGeometry,
) -> float:
    """Data term plus lambda * anisotropic TV for the TV prior.

    The plug-and-play prior has no evaluable regularizer, so only the data
    term is reported for that branch.
    """
    resid = Y - mix_values(A, X, s)
    value = 0.5 * float(np.sum(resid * resid))
    if prior == PRIOR_TV:
        value += lam * float(np.sum(np.abs(grad_rows(X, geom))))
    return value


def kkt_residuals(
    state: SolverState, A: Dictionary | np.ndarray, Y: SpectralCube | np.ndarray,
    rho: float, lam: float,
) -> KktResiduals:
    """Norms of the fixed-point equations of the splitting scheme.

    The subgradient residual (8) measures the elementwise distance of
    rho*D/lambda from the L1 subdifferential at U; it is identically 0 for the
    plug-and-play prior, whose regularizer is implicit in the denoiser.
    """
    Aarr = A.spectra if isinstance(A, Dictionary) else np.asarray(A, dtype=np.float64)
    Yarr = Y.values if isinstance(Y, SpectralCube) else np.asarray(Y, dtype=np.float64)
    geom = state.geometry
    X, s, M, U, W, t = state.X, state.s, state.M, state.U, state.W, state.t
    C, D, E, g = state.C, state.D, state.E, state.g

    r1 = float(np.linalg.norm(M - X * s[np.newaxis, :]))
    if state.prior == PRIOR_TV:
        r2 = float(np.linalg.norm(U - grad_rows(X, geom)))
        dual_pullback = div_adjoint_rows(D, geom)
    else:
        r2 = float(np.linalg.norm(U - X))
        dual_pullback = D
    r3 = float(np.linalg.norm(W - X))
    r4 = float(np.linalg.norm(t - s))
    r5 = float(np.linalg.norm(C * s[np.newaxis, :] + dual_pullback + E))
    r6 = float(np.linalg.norm(np.einsum("ij,ij->j", X, C) + rho * g))
    r7 = float(np.linalg.norm(Aarr.T @ (Yarr - Aarr @ M) - rho * C))
    if state.prior == PRIOR_TV:
        q = (rho / lam) * D
        dist = np.where(
            U != 0.0, np.abs(q - np.sign(U)), np.maximum(np.abs(q) - 1.0, 0.0)
        )
        r8 = float(np.linalg.norm(dist))
    else:
        r8 = 0.0
    return KktResiduals(r1, r2, r3, r4, r5, r6, r7, r8)


def _finalize(state: SolverState) -> tuple[PhaseMap, ScalingField]:
    """Clamp the output at 0 and renormalize once so the map is feasible."""
    X = np.maximum(state.X, 0.0)
    X, _ = normalize_columns(X)
    s = np.maximum(state.s, 0.0)
    return PhaseMap(state.geometry, X), ScalingField(state.geometry, s)


def _state_finite(state: SolverState) -> bool:
    return all(np.all(np.isfinite(b)) for b in state.blocks())


def solve(
    Y: SpectralCube,
    A: Dictionary,
    cfg: SolverConfig,
    ground_truth: PhaseMap | np.ndarray | None = None,
) -> SolverResult:
    """Run the ADMM to the iteration budget (or the optional RE early exit).

    Returns the feasible phase map and scaling field, the per-iteration
    diagnostics, and the raw final state. A non-finite state aborts the loop
    and returns the last finite iterate with the error recorded.
    """
    cfg.validate()
    check_same_grid(A.grid, Y.grid, "solve")
    geom = Y.geometry
    Aarr, Yarr = A.spectra, Y.values
    gt = None
    if ground_truth is not None:
        gt = ground_truth.abundances if isinstance(ground_truth, PhaseMap) else np.asarray(ground_truth)
        if gt.shape != (A.n_states, geom.n_pixels):
            raise DimensionError("ground truth shape does not match dictionary/geometry")

    state = init_state(Y, A, cfg)
    system = MSystem(Aarr, cfg.rho)
    AtY = Aarr.T @ Yarr
    denoiser = cfg.denoiser_spec() if cfg.prior == PRIOR_PNP else None

    diagnostics: list[DiagnosticsRecord] = []
    error = None
    converged = False
    good = state.copy()
    for it in range(1, cfg.max_iter + 1):
        prev_duals = tuple(d.copy() for d in state.duals())
        if cfg.prior == PRIOR_TV:
            X_new, cg_iters, cg_ok = update_x_tv(state, geom, cfg)
        else:
            X_new = update_x_pnp(state)
            cg_iters, cg_ok = 0, True
        state.X, _ = normalize_columns(X_new)
        state.s = update_s(state)
        state.M = update_m(state, system, AtY)
        if cfg.prior == PRIOR_TV:
            state.U = update_u_tv(state, cfg.lam, cfg.rho)
        else:
            state.U = update_u_pnp(state, denoiser, cfg.lam, cfg.rho)
        state.W, state.t = project_splits(state)
        state.C, state.D, state.E, state.g = update_duals(state)

        if not _state_finite(state):
            error = f"non-finite state at iteration {it}; returning last finite iterate"
            state = good
            break
        good = state.copy()

        re = relative_error(prev_duals, state.duals())
        obj = objective_value(Yarr, Aarr, state.X, state.s, cfg.lam, cfg.prior, geom)
        kkt = kkt_residuals(state, Aarr, Yarr, cfg.rho, cfg.lam)
        rmse_gt = None
        if gt is not None:
            rmse_gt = float(np.sqrt(np.mean((state.X - gt) ** 2)))
        diagnostics.append(
            DiagnosticsRecord(it, re, obj, kkt, rmse_gt, cg_iters, cg_ok)
        )
        if cfg.re_tol > 0 and re < cfg.re_tol:
            converged = True
            break

    phase, scaling = _finalize(state)
    return SolverResult(phase, scaling, diagnostics, state, converged, error)


def run(
    Y: SpectralCube,
    A: Dictionary,
    cfg: SolverConfig,
    ground_truth: PhaseMap | np.ndarray | None = None,
) -> tuple[PhaseMap, ScalingField, list[DiagnosticsRecord]]:
    """Convenience wrapper over `solve` returning only the outputs."""
    result = solve(Y, A, cfg, ground_truth)
    if result.error is not None:
        warnings.warn(result.error, RuntimeWarning)
    return result.phase_map, result.scaling, result.diagnostics


DIAGNOSTICS_HEADER = (
    "iter,re,objective,kkt_1,kkt_2,kkt_3,kkt_4,kkt_5,kkt_6,kkt_7,kkt_8,rmse,cg_iters"
)


def diagnostics_to_csv(records: Sequence[DiagnosticsRecord]) -> str:
    """One CSV row per iteration; rmse is empty when no ground truth was given."""
    buf = io.StringIO()
    buf.write(DIAGNOSTICS_HEADER + "\n")
    for r in records:
        kkt = ",".join(repr(v) for v in r.kkt.as_tuple())
        rmse = "" if r.rmse_vs_gt is None else repr(r.rmse_vs_gt)
        buf.write(f"{r.iter},{r.re!r},{r.objective!r},{kkt},{rmse},{r.cg_iters}\n")
    return buf.getvalue()


def write_diagnostics_csv(path, records: Sequence[DiagnosticsRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(diagnostics_to_csv(records))
