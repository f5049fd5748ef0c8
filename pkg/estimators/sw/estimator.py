"""SW estimator — common part as the projection on the first r ordinary principal components."""
from __future__ import annotations

import logging

import numpy as np
from scipy import linalg

from gdpc_shared.errors import EigenSolverError, ParameterRangeError
from gdpc_shared.models import CommonPartEstimate, MethodName
from gdpc_shared.timeseries import PanelLike, center_columns, fix_signs

logger = logging.getLogger("gdpc.sw")


def _top_eigenpairs(sym: np.ndarray, r: int) -> tuple[np.ndarray, np.ndarray]:
    n = sym.shape[0]
    try:
        vals, vecs = linalg.eigh(sym, subset_by_index=[n - r, n - 1])
    except linalg.LinAlgError as e:
        raise EigenSolverError("SW eigendecomposition", details=str(e)) from e
    order = np.argsort(vals)[::-1]
    return vals[order], fix_signs(vecs[:, order])


def fit_sw(Z: PanelLike, r: int) -> CommonPartEstimate:
    """chi_hat = 1 zbar' + X_c V V' with V the top-r eigenvectors of Gamma(0)."""
    xc, means = center_columns(Z)
    T, m = xc.shape
    if not 1 <= r <= min(T, m):
        raise ParameterRangeError("r", r, f"1 <= r <= min(T, m) = {min(T, m)}")

    if m <= T:
        vals, v = _top_eigenpairs(xc.T @ xc / T, r)
        common = (xc @ v) @ v.T
        solver = "covariance"
    else:
        # same projection through the T x T Gram matrix: X V V' = U U' X
        vals, u = _top_eigenpairs(xc @ xc.T / T, r)
        common = u @ (u.T @ xc)
        solver = "gram"

    total = float(np.sum(xc * xc)) / T
    logger.info("SW fit T=%d m=%d r=%d via %s", T, m, r, solver)
    return CommonPartEstimate(
        chi_hat=means + common,
        method=MethodName.SW,
        r=r,
        diagnostics={
            "eigenvalues": vals.tolist(),
            "explained_variance": float(vals.sum() / total) if total > 0 else 0.0,
            "solver": solver,
        },
    )
