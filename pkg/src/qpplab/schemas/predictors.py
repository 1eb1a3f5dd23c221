# src/qpplab/schemas/predictors.py
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field


class WigVariant(str, Enum):
    mean_diff = "paper_mean_diff"
    classic = "classic"


class Aggregator(str, Enum):
    Min = "Min"
    Max = "Max"
    Mean = "Mean"
    Q1 = "Q1"
    Median = "Median"
    Q3 = "Q3"
    Std = "Std"
    Var = "Var"
    Sum = "Sum"


DEFAULT_LETOR_FEATURES = ("L.BM25", "L.DFree", "L.Lemur", "L.InExpC2")


class PredictorConfig(BaseModel):
    """Profundidades k de los predictores SOTA (configurables desde la CLI)."""
    k_nqc: int = Field(100, ge=1)
    k_uqc: int = Field(100, ge=1)
    k_wig: int = Field(5, ge=1)
    qf_depth: int = Field(50, ge=1)
    wig_variant: WigVariant = WigVariant.mean_diff

    model_config = ConfigDict(frozen=True)
