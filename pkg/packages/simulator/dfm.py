"""Dynamic factor model simulator — the four one-factor designs used in the Monte Carlo study.

z_{t,j} = c (beta_{0,j} f_t + ... + beta_{k,j} f_{t-k}) + e_{t,j}

Draw order per panel is fixed: factor coefficient, factor innovations,
loadings, idiosyncratic coefficients, idiosyncratic innovations.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy import signal

from gdpc_shared.errors import (
    DegenerateFactorError,
    DimensionMismatchError,
    InfeasibleOrthogonalizationError,
    ParameterRangeError,
)
from gdpc_shared.models import FactorLaw, IdioLaw, ScenarioName
from gdpc_shared.timeseries import PanelMatrix, lagged_matrix
from gdpc_shared.utils.rng import make_rng

logger = logging.getLogger("gdpc.simulator")

COEFF_BOUND = 0.9


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DfmScenario:
    name: ScenarioName
    k: int
    factor_law: FactorLaw
    idio_law: IdioLaw
    scenario_id: int


SCENARIOS: dict[ScenarioName, DfmScenario] = {
    ScenarioName.DFM1: DfmScenario(ScenarioName.DFM1, 1, FactorLaw.MA1, IdioLaw.IID, 1),
    ScenarioName.DFM1AR: DfmScenario(ScenarioName.DFM1AR, 1, FactorLaw.MA1, IdioLaw.AR1, 2),
    ScenarioName.DFM2: DfmScenario(ScenarioName.DFM2, 2, FactorLaw.AR1, IdioLaw.IID, 3),
    ScenarioName.DFM2AR: DfmScenario(ScenarioName.DFM2AR, 2, FactorLaw.AR1, IdioLaw.AR1, 4),
}


def get_scenario(name: ScenarioName | str) -> DfmScenario:
    return SCENARIOS[ScenarioName(name)]


@dataclass
class SimulatedPanel:
    """One draw: observed Z, true common part chi = c u, and everything used to build it."""
    Z: PanelMatrix
    chi: np.ndarray
    f: np.ndarray
    beta: np.ndarray
    c: float
    e: np.ndarray
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.beta.shape[0] - 1


# ---------------------------------------------------------------------------
# Components
# ---------------------------------------------------------------------------

def generate_loadings(m: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """(k+1) x m Gaussian draw orthogonalized so that beta beta' = m I."""
    if m < k + 1:
        raise InfeasibleOrthogonalizationError(m, k)
    draw = rng.standard_normal((k + 1, m))
    q, r = np.linalg.qr(draw.T)
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return np.sqrt(m) * (q * signs).T


def simulate_factor(
    law: FactorLaw,
    T: int,
    k: int,
    rng: np.random.Generator,
    coeff: Optional[float] = None,
) -> tuple[np.ndarray, float]:
    """Factor path of length T+k (t = 1-k ... T) and its MA/AR coefficient."""
    if T < 1:
        raise ParameterRangeError("T", T, "T >= 1")
    if coeff is None:
        coeff = float(rng.uniform(-COEFF_BOUND, COEFF_BOUND))
    n = T + k
    eps = rng.standard_normal(n + 1)
    if FactorLaw(law) == FactorLaw.MA1:
        return eps[1:] + coeff * eps[:-1], coeff
    # AR(1) from the stationary law: eps[0] scaled to variance 1/(1-coeff^2)
    start = eps[0] / np.sqrt(1.0 - coeff * coeff)
    f, _ = signal.lfilter([1.0], [1.0, -coeff], eps[1:], zi=[coeff * start])
    return f, coeff


def simulate_idiosyncratic(
    law: IdioLaw,
    T: int,
    m: int,
    rng: np.random.Generator,
    coeffs: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """T x m idiosyncratic part with unit population variance per series, plus AR coefficients."""
    if T < 1 or m < 1:
        raise ParameterRangeError("(T, m)", (T, m), "T >= 1 and m >= 1")
    if IdioLaw(law) == IdioLaw.IID:
        return rng.standard_normal((T, m)), np.zeros(m)
    rho = (
        rng.uniform(-COEFF_BOUND, COEFF_BOUND, size=m)
        if coeffs is None
        else np.asarray(coeffs, dtype=np.float64)
    )
    innov = rng.standard_normal((T, m))
    scale = np.sqrt(1.0 - rho * rho)
    e = np.empty((T, m))
    e[0] = innov[0]
    for t in range(1, T):
        e[t] = rho * e[t - 1] + scale * innov[t]
    return e, rho


def assemble_dfm(beta: np.ndarray, f: np.ndarray, e: np.ndarray) -> SimulatedPanel:
    """Scale the common part to unit mean sample variance and add the idiosyncratic part."""
    beta = np.atleast_2d(np.asarray(beta, dtype=np.float64))
    k = beta.shape[0] - 1
    e = np.asarray(e, dtype=np.float64)
    T, m = e.shape
    if beta.shape[1] != m or np.shape(f) != (T + k,):
        raise DimensionMismatchError("assemble_dfm", (T + k, m), (np.shape(f)[0], beta.shape[1]))
    unscaled = lagged_matrix(f, k) @ beta
    vbar = float(np.mean(unscaled.var(axis=0)))
    if not vbar > 0.0:
        raise DegenerateFactorError("Common part has zero sample variance")
    c = 1.0 / np.sqrt(vbar)
    chi = c * unscaled
    return SimulatedPanel(Z=PanelMatrix(chi + e), chi=chi, f=np.asarray(f), beta=beta, c=c, e=e)


def simulate_panel(
    scenario: DfmScenario | ScenarioName | str,
    T: int,
    m: int,
    seed: int,
    noise_scale: float = 1.0,
) -> SimulatedPanel:
    """One replication of a design, reproducible from ``seed``."""
    if not isinstance(scenario, DfmScenario):
        scenario = get_scenario(scenario)
    rng = make_rng(seed)
    f, factor_coeff = simulate_factor(scenario.factor_law, T, scenario.k, rng)
    beta = generate_loadings(m, scenario.k, rng)
    e, idio_coeffs = simulate_idiosyncratic(scenario.idio_law, T, m, rng)
    panel = assemble_dfm(beta, f, noise_scale * e)
    panel.params = {
        "scenario": scenario.name.value,
        "seed": seed,
        "factor_coeff": factor_coeff,
        "idio_coeffs": idio_coeffs,
    }
    logger.debug("Simulated %s T=%d m=%d seed=%d c=%.4f", scenario.name.value, T, m, seed, panel.c)
    return panel
