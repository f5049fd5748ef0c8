"""Tests for the SW principal component estimator."""
from __future__ import annotations

import numpy as np
import pytest
from scipy import linalg

from estimators.sw.estimator import fit_sw
from gdpc_shared.errors import EigenSolverError, ParameterRangeError
from gdpc_shared.models import MethodName
from gdpc_shared.timeseries import PanelMatrix, data_mse


def _svd_oracle(Z: np.ndarray, r: int) -> np.ndarray:
    means = Z.mean(axis=0)
    u, s, vt = np.linalg.svd(Z - means, full_matrices=False)
    return means + (u[:, :r] * s[:r]) @ vt[:r]


class TestFitSw:
    def test_exact_low_rank(self, rng):
        T, m, r = 40, 8, 2
        Z = rng.standard_normal(m) + rng.standard_normal((T, r)) @ rng.standard_normal((r, m))
        est = fit_sw(Z, r)
        np.testing.assert_allclose(est.chi_hat, Z, atol=1e-10)
        assert est.method == MethodName.SW
        assert est.r == r

    def test_matches_truncated_svd(self, rng):
        Z = rng.standard_normal((50, 12))
        est = fit_sw(Z, 3)
        np.testing.assert_allclose(est.chi_hat, _svd_oracle(Z, 3), atol=1e-10)
        assert est.diagnostics["solver"] == "covariance"

    def test_wide_panel_uses_gram_matrix(self, rng):
        Z = rng.standard_normal((15, 40))
        est = fit_sw(Z, 2)
        assert est.diagnostics["solver"] == "gram"
        np.testing.assert_allclose(est.chi_hat, _svd_oracle(Z, 2), atol=1e-10)

    def test_idempotent(self, rng):
        Z = rng.standard_normal((30, 6))
        once = fit_sw(Z, 2).chi_hat
        np.testing.assert_allclose(fit_sw(once, 2).chi_hat, once, atol=1e-10)

    def test_sign_equivariance(self, rng):
        Z = rng.standard_normal((25, 5))
        np.testing.assert_allclose(fit_sw(-Z, 2).chi_hat, -fit_sw(Z, 2).chi_hat, atol=1e-10)

    def test_accepts_panel_matrix(self, rng):
        values = rng.standard_normal((20, 4))
        np.testing.assert_array_equal(fit_sw(PanelMatrix(values), 1).chi_hat, fit_sw(values, 1).chi_hat)

    def test_eigenvalues_descending(self, rng):
        est = fit_sw(rng.standard_normal((60, 10)), 4)
        vals = est.diagnostics["eigenvalues"]
        assert vals == sorted(vals, reverse=True)
        assert 0.0 < est.diagnostics["explained_variance"] <= 1.0

    def test_more_factors_fit_better(self, rng):
        Z = rng.standard_normal((40, 9))
        errors = [data_mse(Z, fit_sw(Z, r).chi_hat) for r in range(1, 6)]
        assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))

    @pytest.mark.parametrize("r", [0, 7])
    def test_r_out_of_range(self, rng, r):
        with pytest.raises(ParameterRangeError):
            fit_sw(rng.standard_normal((6, 10)), r)

    def test_solver_failure_is_translated(self, rng, monkeypatch):
        def broken_eigh(*args, **kwargs):
            raise linalg.LinAlgError("eigenvalues did not converge")

        monkeypatch.setattr(linalg, "eigh", broken_eigh)
        with pytest.raises(EigenSolverError) as exc:
            fit_sw(rng.standard_normal((20, 5)), 2)
        assert exc.value.stage == "SW eigendecomposition"
