"""FHLR estimator — spectral common part through dynamic and generalized principal components.

Pipeline:
1. Bartlett lag-window estimate of the spectral density on 2M+1 Fourier frequencies.
2. Dynamic eigendecomposition per frequency: the q leading eigenpairs form the
   common spectrum, the remainder the idiosyncratic spectrum.
3. Inverse transform at lag 0 gives common and idiosyncratic covariances.
4. The r leading generalized eigenvectors of the pencil (Gamma_chi, diag Gamma_e)
   define the one-sided projection of the centered data.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import linalg

from gdpc_shared.errors import EigenSolverError, ParameterRangeError, SpectralGridError
from gdpc_shared.models import CommonPartEstimate, MethodName
from gdpc_shared.timeseries import PanelLike, autocovariance, center_columns, fix_signs

logger = logging.getLogger("gdpc.fhlr")

RIDGE_EPS = 1e-8
IMAG_TOL = 1e-8


# ---------------------------------------------------------------------------
# Spectral density
# ---------------------------------------------------------------------------

@dataclass
class SpectralEstimate:
    """Spectral matrices at theta_h = 2 pi h / (2M+1), h = -M..M (in that order)."""
    frequencies: np.ndarray
    spectra: np.ndarray
    M: int

    @property
    def m(self) -> int:
        return self.spectra.shape[1]


def fourier_grid(M: int) -> np.ndarray:
    n = 2 * M + 1
    return 2.0 * np.pi * np.arange(-M, M + 1) / n


def bartlett_weights(M: int) -> np.ndarray:
    """Triangular lag window 1 - |u|/(M+1) for u = -M..M."""
    return 1.0 - np.abs(np.arange(-M, M + 1)) / (M + 1.0)


def _conjugate_extend(half: np.ndarray) -> np.ndarray:
    """Given matrices for h = 0..M, return h = -M..M with S(-theta) = conj(S(theta))."""
    return np.concatenate([np.conj(half[:0:-1]), half], axis=0)


def estimate_spectral_density(Z: PanelLike, M: int) -> SpectralEstimate:
    """(1/2pi) sum_{|u|<=M} (1 - |u|/(M+1)) Gamma(u) exp(-i u theta)."""
    xc, _ = center_columns(Z)
    T = xc.shape[0]
    if not 1 <= M < T:
        raise ParameterRangeError("M", M, f"1 <= M < T = {T}")
    lags = np.arange(-M, M + 1)
    gammas = np.stack([autocovariance(xc, int(u)) for u in lags])
    weights = bartlett_weights(M)
    theta = fourier_grid(M)[M:]
    phase = np.exp(-1j * np.outer(theta, lags)) * weights
    half = np.einsum("hu,uab->hab", phase, gammas) / (2.0 * np.pi)
    half = 0.5 * (half + np.conj(np.swapaxes(half, 1, 2)))
    half[0] = half[0].real
    return SpectralEstimate(frequencies=fourier_grid(M), spectra=_conjugate_extend(half), M=M)


def dynamic_pca_split(S: SpectralEstimate, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Split each spectral matrix into its rank-q leading part and the remainder."""
    m = S.m
    if not 1 <= q <= m:
        raise ParameterRangeError("q", q, f"1 <= q <= m = {m}")
    half = S.spectra[S.M:]
    try:
        vals, vecs = np.linalg.eigh(half)
    except np.linalg.LinAlgError as e:
        raise EigenSolverError("dynamic eigendecomposition", details=str(e)) from e
    top_vals = vals[:, -q:]
    top_vecs = vecs[:, :, -q:]
    common = np.einsum("hal,hl,hbl->hab", top_vecs, top_vals, np.conj(top_vecs))
    common = 0.5 * (common + np.conj(np.swapaxes(common, 1, 2)))
    common[0] = common[0].real
    common = _conjugate_extend(common)
    return common, S.spectra - common


def covariances_from_spectra(
    spectra: Union[np.ndarray, Sequence[np.ndarray]], u: int
) -> np.ndarray:
    """(2 pi / (2M+1)) sum_h S(theta_h) exp(i u theta_h), real part."""
    stack = np.asarray(spectra)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise SpectralGridError(f"Expected a stack of square matrices, got shape {stack.shape}")
    n = stack.shape[0]
    if n % 2 == 0:
        raise SpectralGridError(f"Frequency grid must have odd length 2M+1, got {n}")
    M = (n - 1) // 2
    phase = np.exp(1j * u * fourier_grid(M))
    gamma = np.einsum("h,hab->ab", phase, stack) * (2.0 * np.pi / n)
    scale = max(float(np.abs(gamma).max()), np.finfo(float).tiny)
    if float(np.abs(gamma.imag).max()) > IMAG_TOL * scale:
        raise SpectralGridError(
            "Inverse transform has a non-negligible imaginary part",
            details=f"max |imag| = {np.abs(gamma.imag).max():.3g}, scale {scale:.3g}",
        )
    return gamma.real


# ---------------------------------------------------------------------------
# Common part
# ---------------------------------------------------------------------------

def idiosyncratic_weights(gamma_e: np.ndarray, gamma0: np.ndarray) -> tuple[np.ndarray, float]:
    """Diagonal of Gamma_e(0) plus the ridge eps * trace(Gamma_e) / m.

    The full m x m Gamma_e(0) has rank at most T and is near singular on wide
    panels; only its diagonal enters the pencil.
    """
    m = gamma_e.shape[0]
    trace_e = float(np.trace(gamma_e))
    if trace_e <= 1e-12 * float(np.trace(gamma0)):
        logger.warning("Idiosyncratic covariance is negligible; ridge scaled by total covariance")
        trace_e = float(np.trace(gamma0))
    ridge = RIDGE_EPS * trace_e / m
    return np.maximum(np.diag(gamma_e), 0.0) + ridge, ridge


def fit_fhlr(Z: PanelLike, q: int, r: int) -> CommonPartEstimate:
    """Generalized principal component projection of the centered panel."""
    xc, means = center_columns(Z)
    T, m = xc.shape
    if T < 10:
        raise ParameterRangeError("T", T, "T >= 10")
    if not 1 <= q <= r <= m:
        raise ParameterRangeError("(q, r)", (q, r), f"1 <= q <= r <= m = {m}")

    M = math.isqrt(T)
    spectral = estimate_spectral_density(xc, M)
    common_spec, idio_spec = dynamic_pca_split(spectral, q)
    gamma_chi = covariances_from_spectra(common_spec, 0)
    gamma_e = covariances_from_spectra(idio_spec, 0)
    gamma_chi = 0.5 * (gamma_chi + gamma_chi.T)
    gamma_e = 0.5 * (gamma_e + gamma_e.T)
    gamma0 = xc.T @ xc / T

    weights, ridge = idiosyncratic_weights(gamma_e, gamma0)
    try:
        gen_vals, gen_vecs = linalg.eigh(
            gamma_chi, np.diag(weights), subset_by_index=[m - r, m - 1]
        )
    except linalg.LinAlgError as e:
        raise EigenSolverError("FHLR generalized eigenproblem", details=str(e)) from e
    order = np.argsort(gen_vals)[::-1]
    gen_vals = gen_vals[order]
    zr = fix_signs(gen_vecs[:, order])

    inner = zr.T @ gamma0 @ zr
    try:
        loadings = linalg.solve(inner, zr.T @ gamma_chi, assume_a="pos")
    except linalg.LinAlgError as e:
        raise EigenSolverError("FHLR projection", details=str(e)) from e
    chi_hat = means + (xc @ zr) @ loadings

    dyn_vals = np.linalg.eigvalsh(spectral.spectra[M])[::-1][:q]
    logger.info("FHLR fit T=%d m=%d q=%d r=%d M=%d ridge=%.3g", T, m, q, r, M, ridge)
    return CommonPartEstimate(
        chi_hat=chi_hat,
        method=MethodName.FHLR,
        r=r,
        diagnostics={
            "M": M,
            "generalized_eigenvalues": gen_vals.tolist(),
            "ridge": ridge,
            "dynamic_eigenvalues_at_zero": dyn_vals.tolist(),
        },
    )
