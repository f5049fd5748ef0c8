"""GDPC estimator — first generalized dynamic principal component by alternating least squares.

The component is a scalar path f (t = 1-k ... T) with intercepts alpha and
lag loadings beta such that alpha_j + sum_h beta[h, j] f_{t-h} reconstructs
the panel with minimal mean squared error. Each iteration solves two linear
systems:

- per-series regressions of z_j on (1, f_t, ..., f_{t-k})  -> alpha, beta
- a (T+k) x (T+k) banded system in f given (alpha, beta)    -> f

Neither system grows with m beyond forming cross products, so the fit
scales to wide panels.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import linalg

from gdpc_shared.errors import (
    DegenerateFactorError,
    DimensionMismatchError,
    EigenSolverError,
    GDPCError,
    MonotonicityError,
    ParameterRangeError,
    SingularDesignError,
    SingularSystemError,
)
from gdpc_shared.models import CommonPartEstimate, GdpcOptions, InitStrategy, MethodName
from gdpc_shared.timeseries import PanelLike, as_matrix, center_columns, lagged_matrix

logger = logging.getLogger("gdpc.solver")

MAX_CONDITION = 1e12
DESIGN_RCOND = 1e-12
MONOTONE_SLACK = 1e-9


# ---------------------------------------------------------------------------
# Fit container
# ---------------------------------------------------------------------------

@dataclass
class GdpcFit:
    """Factor path, intercepts, loadings and convergence metadata."""
    f: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    k: int
    mse: float = float("nan")
    iterations: int = 0
    converged: bool = False
    history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=np.float64)
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=np.float64))
        if self.beta.shape != (self.k + 1, self.alpha.shape[0]):
            raise DimensionMismatchError("beta", (self.k + 1, self.alpha.shape[0]), self.beta.shape)
        if self.f.ndim != 1 or self.f.shape[0] <= self.k:
            raise DimensionMismatchError("f", (self.k + 1,), self.f.shape)

    @property
    def T(self) -> int:
        return self.f.shape[0] - self.k

    @property
    def m(self) -> int:
        return self.alpha.shape[0]


# ---------------------------------------------------------------------------
# Reconstruction and objective
# ---------------------------------------------------------------------------

def reconstruct(fit: GdpcFit) -> np.ndarray:
    """T x m reconstruction alpha_j + sum_h beta[h, j] f_{t-h}."""
    return fit.alpha + lagged_matrix(fit.f, fit.k) @ fit.beta


def mse(Z: PanelLike, fit: GdpcFit) -> float:
    """(1/Tm) sum_t ||z_t - zhat_t||^2."""
    z = as_matrix(Z)
    if z.shape != (fit.T, fit.m):
        raise DimensionMismatchError("mse", (fit.T, fit.m), z.shape)
    resid = z - reconstruct(fit)
    return float(np.mean(resid * resid))


# ---------------------------------------------------------------------------
# Half-steps
# ---------------------------------------------------------------------------

def update_loadings(Z: PanelLike, f: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares (alpha, beta) of every series on (1, f_t, ..., f_{t-k})."""
    z = as_matrix(Z)
    T = z.shape[0]
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (T + k,):
        raise DimensionMismatchError("f", (T + k,), f.shape)
    design = np.column_stack([np.ones(T), lagged_matrix(f, k)])
    try:
        q, r = np.linalg.qr(design)
    except np.linalg.LinAlgError as e:
        raise SingularDesignError("QR of the loadings design failed", details=str(e)) from e
    diag = np.abs(np.diag(r))
    if diag.min() <= DESIGN_RCOND * max(diag.max(), np.finfo(float).tiny):
        raise SingularDesignError(
            f"Design (1, f_t..f_t-{k}) is rank deficient",
            details=f"|R_ii| range [{diag.min():.3g}, {diag.max():.3g}]",
        )
    coef = linalg.solve_triangular(r, q.T @ z)
    return coef[0], coef[1:]


def factor_normal_equations(
    Z: PanelLike, alpha: np.ndarray, beta: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Banded normal equations A f = b of the factor half-step.

    Returns ``(ab, b)`` where ``ab`` is the upper band of A in LAPACK layout:
    ``ab[k + i - j, j] = A[i, j]`` for ``j - k <= i <= j``.
    """
    z = as_matrix(Z)
    T, m = z.shape
    beta = np.atleast_2d(np.asarray(beta, dtype=np.float64))
    k = beta.shape[0] - 1
    if beta.shape[1] != m or np.shape(alpha) != (m,):
        raise DimensionMismatchError("loadings", (k + 1, m), beta.shape)
    n = T + k
    # observation t (row r) touches f index r + k - h with weight beta[h]
    cross = beta @ beta.T
    proj = (z - alpha) @ beta.T
    ab = np.zeros((k + 1, n))
    b = np.zeros(n)
    for h in range(k + 1):
        b[k - h: k - h + T] += proj[:, h]
        for d in range(h + 1):
            col = k - h + d
            ab[k - d, col: col + T] += cross[h, h - d]
    return ab, b


def banded_to_dense(ab: np.ndarray) -> np.ndarray:
    """Expand an upper LAPACK band to the full symmetric matrix."""
    k = ab.shape[0] - 1
    n = ab.shape[1]
    dense = np.zeros((n, n))
    for d in range(k + 1):
        diag = ab[k - d, d:]
        dense += np.diag(diag, d)
        if d:
            dense += np.diag(diag, -d)
    return dense


def update_factor(Z: PanelLike, alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Solve the banded factor normal equations by banded Cholesky."""
    ab, b = factor_normal_equations(Z, alpha, beta)
    k = ab.shape[0] - 1
    T = ab.shape[1] - k
    try:
        chol = linalg.cholesky_banded(ab, lower=False)
    except linalg.LinAlgError as e:
        raise SingularSystemError(T, k, float("inf"), details=str(e)) from e
    diag = chol[k]
    condition = float((diag.max() / diag.min()) ** 2) if diag.min() > 0 else float("inf")
    if condition > MAX_CONDITION:
        raise SingularSystemError(T, k, condition)
    return linalg.cho_solve_banded((chol, False), b)


# ---------------------------------------------------------------------------
# Normalization and initialization
# ---------------------------------------------------------------------------

def normalize(fit: GdpcFit) -> GdpcFit:
    """Zero-mean unit-variance f with sum_j beta[0, j] >= 0; reconstruction unchanged."""
    mu = float(fit.f.mean())
    sigma = float(fit.f.std())
    if not sigma > 0.0:
        raise DegenerateFactorError("Factor path has zero variance")
    sign = -1.0 if fit.beta[0].sum() < 0.0 else 1.0
    f = sign * (fit.f - mu) / sigma
    beta = fit.beta * (sigma * sign)
    alpha = fit.alpha + mu * fit.beta.sum(axis=0)
    return replace(fit, f=f, alpha=alpha, beta=beta)


def initial_factor(Z: PanelLike, k: int, lead: Optional[int] = None) -> np.ndarray:
    """First ordinary principal component, standardized, placed inside a T+k path.

    ``lead`` zeros precede the component and ``k - lead`` follow it; the
    default puts all k zeros in the pre-sample.
    """
    lead = k if lead is None else lead
    if not 0 <= lead <= k:
        raise ParameterRangeError("lead", lead, f"0 <= lead <= k = {k}")
    xc, _ = center_columns(Z)
    try:
        u, s, _ = np.linalg.svd(xc, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise EigenSolverError("initial principal component", details=str(e)) from e
    pc = u[:, 0] * s[0]
    sd = pc.std()
    if not sd > 0.0:
        raise DegenerateFactorError("Panel has no variation to initialize from")
    return np.concatenate([np.zeros(lead), (pc - pc.mean()) / sd, np.zeros(k - lead)])


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def _alternate(z: np.ndarray, f: np.ndarray, k: int, opts: GdpcOptions) -> GdpcFit:
    alpha, beta = update_loadings(z, f, k)
    fit = GdpcFit(f=f, alpha=alpha, beta=beta, k=k)
    current = mse(z, fit)
    history = [current]
    scale = float(np.mean(z * z))
    converged = current == 0.0
    iterations = 0

    while not converged and iterations < opts.max_iter:
        iterations += 1
        f = update_factor(z, alpha, beta)
        alpha, beta = update_loadings(z, f, k)
        fit = GdpcFit(f=f, alpha=alpha, beta=beta, k=k)
        previous, current = current, mse(z, fit)
        history.append(current)
        if current > previous + MONOTONE_SLACK * max(previous, scale):
            raise MonotonicityError(iterations, previous, current)
        logger.debug("iteration %d: mse=%.12g", iterations, current)
        if current == 0.0 or abs(previous - current) / previous < opts.tol:
            converged = True

    if not converged:
        logger.warning("GDPC fit stopped at max_iter=%d (mse=%.6g)", opts.max_iter, current)

    fit = normalize(fit)
    fit.mse = mse(z, fit)
    fit.iterations = iterations
    fit.converged = converged
    fit.history = history
    return fit


def fit_gdpc(Z: PanelLike, k: int, opts: Optional[GdpcOptions] = None) -> GdpcFit:
    """Alternate loadings / factor updates until the relative MSE change drops below tol.

    With the first-PC start and ``shifted_starts`` on, the fit runs from each
    of the k+1 placements of the component in the T+k path and keeps the
    lowest MSE; ties go to the earliest start (all zeros in the pre-sample).
    """
    opts = opts or GdpcOptions()
    z = as_matrix(Z)
    T, m = z.shape
    if k < 0 or T <= k + 2:
        raise ParameterRangeError("k", k, f"0 <= k < T - 2 = {T - 2}")

    if opts.init == InitStrategy.PROVIDED:
        f = np.asarray(opts.initial_factor, dtype=np.float64)
        if f.shape != (T + k,):
            raise DimensionMismatchError("initial_factor", (T + k,), f.shape)
        starts = [f]
    else:
        leads = range(k, -1, -1) if opts.shifted_starts else [k]
        base = initial_factor(z, k, lead=0)
        starts = [np.roll(base, lead) for lead in leads]

    best: Optional[GdpcFit] = None
    first_error: Optional[GDPCError] = None
    for i, f0 in enumerate(starts):
        try:
            fit = _alternate(z, f0, k, opts)
        except GDPCError as e:
            if len(starts) == 1:
                raise
            logger.warning("GDPC start %d/%d failed: %s", i + 1, len(starts), e.message)
            first_error = first_error or e
            continue
        logger.debug("GDPC start %d/%d: mse=%.12g", i + 1, len(starts), fit.mse)
        if best is None or fit.mse < best.mse:
            best = fit
    if best is None:
        raise first_error

    logger.info(
        "GDPC fit T=%d m=%d k=%d: mse=%.6g after %d iterations (converged=%s, starts=%d)",
        T, m, k, best.mse, best.iterations, best.converged, len(starts),
    )
    return best


def common_part(fit: GdpcFit) -> CommonPartEstimate:
    """Reconstruction as a common-part estimate with r = k + 1 static factors."""
    return CommonPartEstimate(
        chi_hat=reconstruct(fit),
        method=MethodName.GDPC,
        r=fit.k + 1,
        diagnostics={
            "mse": fit.mse,
            "iterations": fit.iterations,
            "converged": fit.converged,
        },
    )
