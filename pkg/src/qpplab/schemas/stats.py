# src/qpplab/schemas/stats.py
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Marker(str, Enum):
    none = "none"
    dagger = "dagger"      # p < 0.05
    ddagger = "ddagger"    # p < 0.01

    @property
    def symbol(self) -> str:
        return {"none": "", "dagger": "†", "ddagger": "‡"}[self.value]


def marker_for(p_value: float) -> Marker:
    if p_value < 0.01:
        return Marker.ddagger
    if p_value < 0.05:
        return Marker.dagger
    return Marker.none


class CorrelationResult(BaseModel):
    coefficient: float = Field(..., ge=-1.0, le=1.0)
    p_value: float = Field(..., ge=0.0, le=1.0)
    n: int
    marker: Marker
    method: str = "pearson"

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_marker(self):
        if self.marker != marker_for(self.p_value):
            raise ValueError("El marcador no corresponde al p-value")
        return self


# ============================================================================
# ANOVA de un factor
# ============================================================================

class AnovaRow(BaseModel):
    source: str
    df: int
    sum_sq: float = Field(..., ge=0.0)
    mean_sq: float

    model_config = ConfigDict(frozen=True)


class AnovaTable(BaseModel):
    factor: AnovaRow
    residuals: AnovaRow
    f_value: float
    p_value: float = Field(..., ge=0.0, le=1.0)

    model_config = ConfigDict(frozen=True)

    @property
    def total_sum_sq(self) -> float:
        return self.factor.sum_sq + self.residuals.sum_sq


class ErrorReport(BaseModel):
    mae: float = Field(..., ge=0.0)
    rmse: float = Field(..., ge=0.0)
    medae: float = Field(..., ge=0.0)
    r_squared: Optional[float] = Field(None, le=1.0)
    n: int

    model_config = ConfigDict(frozen=True)


class PairedTTestResult(BaseModel):
    t_statistic: float
    df: int
    p_value: float = Field(..., ge=0.0, le=1.0)
    p_adjusted: float = Field(..., ge=0.0, le=1.0)
    m_comparisons: int = Field(..., ge=1)
    marker: Marker

    model_config = ConfigDict(frozen=True)
