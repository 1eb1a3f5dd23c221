# src/qpplab/schemas/routing.py
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from qpplab.schemas.stats import PairedTTestResult


class Choice(str, Enum):
    R1 = "R1"
    R2 = "R2"


class RouteResult(BaseModel):
    """Elección de ranker por consulta y evaluación del meta-sistema resultante."""
    policy: str
    params: Dict[str, str] = {}
    choices: Dict[str, Choice]
    meta_scores: Dict[str, float]
    mean_meta: float
    mean_r1: float
    mean_r2: float
    oracle_mean: float
    beats_both: bool

    model_config = ConfigDict(frozen=True)

    @property
    def fraction_r2(self) -> float:
        if not self.choices:
            return 0.0
        return sum(1 for c in self.choices.values() if c == Choice.R2) / len(self.choices)

    @property
    def label(self) -> str:
        if not self.params:
            return self.policy
        return self.policy + " (" + ", ".join(f"{k}={v}" for k, v in sorted(self.params.items())) + ")"


class PairedComparison(BaseModel):
    """t-test pareado del meta-sistema frente a uno de los rankers; None si no está definido."""
    system: str
    baseline: str
    result: Optional[PairedTTestResult] = None


class SweepPoint(BaseModel):
    threshold: float
    mean_meta: float
    fraction_r2: float = Field(..., ge=0.0, le=1.0)


class ThresholdSweep(BaseModel):
    points: List[SweepPoint]
    best_threshold: Optional[float] = None
    best_mean: Optional[float] = None

    @model_validator(mode="after")
    def _check_increasing(self):
        for prev, cur in zip(self.points, self.points[1:]):
            if not cur.threshold > prev.threshold:
                raise ValueError("Los umbrales deben ser estrictamente crecientes")
        return self
