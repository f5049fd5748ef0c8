"""Shared numerical primitives: panels, centering, covariances, norms and the error metric.

All functions are pure and operate on float64 arrays; they accept either a
``PanelMatrix`` or anything ``np.asarray`` turns into a 2-D matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from gdpc_shared.errors import (
    DegenerateReferenceError,
    DimensionMismatchError,
    InvalidPanelError,
    LagOutOfRangeError,
)

logger = logging.getLogger("gdpc.core")

POWER_TOL = 1e-10
POWER_STEP_TOL = 1e-7
POWER_MAX_ITER = 10_000


# ---------------------------------------------------------------------------
# Panel type
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PanelMatrix:
    """T x m matrix of observations: rows are time points, columns are series."""
    values: np.ndarray
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidPanelError(f"Panel must be 2-D, got {values.ndim}-D")
        T, m = values.shape
        if T < 2 or m < 1:
            raise InvalidPanelError(f"Panel needs T >= 2 and m >= 1, got {T}x{m}")
        if not np.all(np.isfinite(values)):
            raise InvalidPanelError("Panel contains NaN or Inf entries")
        names = list(self.names) or [f"z{j + 1}" for j in range(m)]
        if len(names) != m:
            raise InvalidPanelError(f"{len(names)} series names for {m} columns")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


PanelLike = Union[PanelMatrix, np.ndarray]


def as_matrix(X: PanelLike) -> np.ndarray:
    """Return the float64 matrix behind ``X``, validating finiteness."""
    if isinstance(X, PanelMatrix):
        return X.values
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidPanelError(f"Expected a 2-D matrix, got {arr.ndim}-D")
    if arr.size == 0:
        raise InvalidPanelError("Matrix has no entries")
    if not np.all(np.isfinite(arr)):
        raise InvalidPanelError("Matrix contains NaN or Inf entries")
    return arr


# ---------------------------------------------------------------------------
# Centering and covariances
# ---------------------------------------------------------------------------

def center_columns(X: PanelLike) -> tuple[np.ndarray, np.ndarray]:
    """Subtract column means. Returns ``(centered, means)``."""
    arr = as_matrix(X)
    means = arr.mean(axis=0)
    return arr - means, means


def autocovariance(X: PanelLike, u: int) -> np.ndarray:
    """Biased lag-u autocovariance (1/T) sum_t x_t x_{t+u}' of the centered panel."""
    arr = as_matrix(X)
    T = arr.shape[0]
    if abs(u) >= T:
        raise LagOutOfRangeError(u, T)
    if u < 0:
        return autocovariance(arr, -u).T
    xc, _ = center_columns(arr)
    return xc[: T - u].T @ xc[u:] / T


def lagged_matrix(f: np.ndarray, k: int) -> np.ndarray:
    """Matrix with entry (t, h) = f_{t-h}, where f holds t = 1-k ... T in order."""
    f = np.asarray(f, dtype=np.float64)
    return sliding_window_view(f, k + 1)[:, ::-1]


# ---------------------------------------------------------------------------
# Norms and metrics
# ---------------------------------------------------------------------------

def _power_iterate(gram: np.ndarray, v: np.ndarray) -> float:
    """Power iteration on a PSD matrix; returns the Rayleigh quotient at the fixed point.

    Stops once both the Rayleigh quotient and the unit iterate have settled,
    so a small spectral gap does not end the iteration early.
    """
    scale = max(float(np.trace(gram)), np.finfo(float).tiny)
    v = v / np.linalg.norm(v)
    rq = float(v @ gram @ v)
    for it in range(POWER_MAX_ITER):
        w = gram @ v
        nw = np.linalg.norm(w)
        if nw <= 1e-14 * scale:
            # start vector in the null space
            return 0.0
        w = w / nw
        new_rq = float(w @ gram @ w)
        step = float(np.linalg.norm(w - v))
        v = w
        rq_settled = abs(new_rq - rq) <= POWER_TOL * max(abs(new_rq), np.finfo(float).tiny)
        if rq_settled and step <= POWER_STEP_TOL:
            logger.debug("power iteration converged after %d steps", it + 1)
            return new_rq
        rq = new_rq
    logger.warning("power iteration hit the %d-step cap", POWER_MAX_ITER)
    return rq


def _alternate_start(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=np.float64) * np.where(np.arange(n) % 2, -1.0, 1.0)


def spectral_norm(X: np.ndarray) -> float:
    """Largest singular value via power iteration on X'X from two fixed start vectors.

    The all-ones start can be an exact eigenvector of a smaller eigenvalue (or
    lie in the null space), so a second pass from an alternating ramp always
    runs and the larger Rayleigh quotient wins.
    """
    arr = as_matrix(X)
    gram = arr.T @ arr
    if not np.any(gram):
        return 0.0
    n = gram.shape[0]
    rq = max(_power_iterate(gram, np.ones(n)), _power_iterate(gram, _alternate_start(n)))
    return float(np.sqrt(max(rq, 0.0)))


def relative_frobenius_error(A: np.ndarray, B: np.ndarray) -> float:
    """||A - B||_F^2 / ||A||_F^2."""
    a, b = as_matrix(A), as_matrix(B)
    if a.shape != b.shape:
        raise DimensionMismatchError("relative_frobenius_error", a.shape, b.shape)
    ref = float(np.sum(a * a))
    if ref == 0.0:
        raise DegenerateReferenceError("Reference matrix has zero Frobenius norm")
    diff = a - b
    return float(np.sum(diff * diff)) / ref


def data_mse(Z: PanelLike, Zhat: np.ndarray) -> float:
    """Mean squared difference (1/Tm) sum ||z_t - zhat_t||^2."""
    z, zhat = as_matrix(Z), np.asarray(Zhat, dtype=np.float64)
    if z.shape != zhat.shape:
        raise DimensionMismatchError("data_mse", z.shape, zhat.shape)
    diff = z - zhat
    return float(np.mean(diff * diff))


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the first nonzero coordinate of each is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        nz = np.flatnonzero(np.abs(out[:, j]) > 1e-14)
        if nz.size and out[nz[0], j] < 0:
            out[:, j] = -out[:, j]
    return out
