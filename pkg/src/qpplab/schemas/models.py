# src/qpplab/schemas/models.py
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from qpplab.schemas.stats import CorrelationResult

MODEL_FORMAT_VERSION = 1


class LinearModel(BaseModel):
    kind: Literal["linear"] = "linear"
    feature_names: Tuple[str, ...]
    coefficients: Tuple[float, ...]
    intercept: float

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_dims(self):
        if len(self.coefficients) != len(self.feature_names):
            raise ValueError("Un coeficiente por feature")
        return self


class TreeArrays(BaseModel):
    """
    Árbol de regresión en forma de arreglos. Nodo i es hoja si feature[i] == -1;
    si no, x[feature[i]] <= threshold[i] va a left[i] y el resto a right[i].
    value[i] es la media de los objetivos de entrenamiento del nodo.
    """
    feature: Tuple[int, ...]
    threshold: Tuple[float, ...]
    left: Tuple[int, ...]
    right: Tuple[int, ...]
    value: Tuple[float, ...]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_arrays(self):
        size = len(self.feature)
        if not size or any(len(a) != size for a in (self.threshold, self.left, self.right, self.value)):
            raise ValueError("Arreglos del árbol inconsistentes")
        return self


class ForestParams(BaseModel):
    n_trees: int = Field(100, ge=1)
    max_depth: int = Field(8, ge=0)
    min_leaf: int = Field(2, ge=1)

    model_config = ConfigDict(frozen=True)


class ForestModel(BaseModel):
    kind: Literal["forest"] = "forest"
    feature_names: Tuple[str, ...]
    trees: Tuple[TreeArrays, ...]
    params: ForestParams
    seed: int

    model_config = ConfigDict(frozen=True)


Model = Union[LinearModel, ForestModel]


class LearnerSpec(BaseModel):
    kind: Literal["lr", "rf"] = "lr"
    forest: ForestParams = ForestParams()
    threads: int = Field(1, ge=1)

    model_config = ConfigDict(frozen=True)


# ============================================================================
# Validación cruzada en dos mitades
# ============================================================================

class CvSplit(BaseModel):
    fold_a: Tuple[str, ...]
    fold_b: Tuple[str, ...]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_partition(self):
        if set(self.fold_a) & set(self.fold_b):
            raise ValueError("Los folds no son disjuntos")
        if abs(len(self.fold_a) - len(self.fold_b)) > 1:
            raise ValueError("Los folds difieren en más de una consulta")
        return self

    def all_ids(self) -> List[str]:
        return sorted(self.fold_a + self.fold_b)


class CrossFitted(BaseModel):
    """Un modelo por fold; `model_a` se entrena con fold_a y predice fold_b."""
    split: CvSplit
    model_a: Model = Field(..., discriminator="kind")
    model_b: Model = Field(..., discriminator="kind")
    columns: Tuple[str, ...]

    model_config = ConfigDict(frozen=True)

    def training_ids(self, model_name: str) -> Tuple[str, ...]:
        return self.split.fold_a if model_name == "a" else self.split.fold_b


class FoldCorrelation(BaseModel):
    fold: str
    pearson: Optional[CorrelationResult]
    kendall: Optional[CorrelationResult]


class CrossValidationResult(BaseModel):
    mode: Literal["fold_average", "pooled"]
    predictions: Dict[str, float]
    folds: List[FoldCorrelation]
    pearson: Optional[CorrelationResult]
    kendall: Optional[CorrelationResult]
    cross: Optional[CrossFitted] = None


class CrossFittedDump(BaseModel):
    """Par de modelos por fold con su split, para repetir un enrutamiento."""
    format_version: int = MODEL_FORMAT_VERSION
    cross: CrossFitted
