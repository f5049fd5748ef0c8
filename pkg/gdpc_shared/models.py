"""Core data models shared across estimators, simulator and harness."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


# ---------------------------------------------------------------------------
# Enumerations
# ---------------------------------------------------------------------------

class MethodName(str, Enum):
    """Common-part estimators, in the column order of the results table."""
    GDPC = "GDPC"
    FHLR = "FHLR"
    SW = "SW"


class ScenarioName(str, Enum):
    """Simulation designs."""
    DFM1 = "DFM1"
    DFM1AR = "DFM1AR"
    DFM2 = "DFM2"
    DFM2AR = "DFM2AR"


class FactorLaw(str, Enum):
    MA1 = "MA1"
    AR1 = "AR1"


class IdioLaw(str, Enum):
    IID = "IID"
    AR1 = "AR1"


class InitStrategy(str, Enum):
    FIRST_PC = "first_pc"
    PROVIDED = "provided"


# ---------------------------------------------------------------------------
# Options
# ---------------------------------------------------------------------------

class GdpcOptions(BaseModel):
    """Stopping rule and initialization for the alternating least squares fit."""
    model_config = ConfigDict(frozen=True)

    tol: float = Field(default=1e-6, gt=0.0, lt=1.0)
    max_iter: int = Field(default=500, ge=1)
    init: InitStrategy = InitStrategy.FIRST_PC
    initial_factor: Optional[list[float]] = None
    # first-PC start only: also try every placement of the component in the T+k path
    shifted_starts: bool = True

    @model_validator(mode="after")
    def _check_init(self) -> GdpcOptions:
        if self.init == InitStrategy.PROVIDED and not self.initial_factor:
            raise ValueError("init='provided' requires initial_factor")
        return self


# ---------------------------------------------------------------------------
# Estimates
# ---------------------------------------------------------------------------

@dataclass
class CommonPartEstimate:
    """Estimated common part chi_hat (T x m) with method tag and diagnostics."""
    chi_hat: np.ndarray
    method: MethodName
    r: int
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if not np.all(np.isfinite(self.chi_hat)):
            raise ValueError("chi_hat contains non-finite entries")

    @property
    def shape(self) -> tuple[int, int]:
        return self.chi_hat.shape
