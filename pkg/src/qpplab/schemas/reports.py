# src/qpplab/schemas/reports.py
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

from qpplab.schemas.stats import CorrelationResult, ErrorReport


class CorrelationRecord(BaseModel):
    """Una celda de tabla de correlación en formato largo."""
    ranker: str = "-"
    collection: str = "-"
    predictor: str
    measure: str
    coefficient: str  # pearson | kendall
    result: Optional[CorrelationResult] = None  # None = no definida (n/a)

    model_config = ConfigDict(frozen=True)


class CorrelationReport(BaseModel):
    records: List[CorrelationRecord]

    def rows(self) -> List[str]:
        """Predictores en orden de primera aparición."""
        seen: List[str] = []
        for record in self.records:
            if record.predictor not in seen:
                seen.append(record.predictor)
        return seen

    def column_groups(self) -> List[Tuple[str, str, str, str]]:
        """(ranker, collection, measure, coefficient) en orden de primera aparición."""
        seen: List[Tuple[str, str, str, str]] = []
        for record in self.records:
            key = (record.ranker, record.collection, record.measure, record.coefficient)
            if key not in seen:
                seen.append(key)
        return seen

    def cell(self, predictor: str, group: Tuple[str, str, str, str]) -> Optional[CorrelationRecord]:
        for record in self.records:
            if record.predictor == predictor and (
                record.ranker, record.collection, record.measure, record.coefficient
            ) == group:
                return record
        return None


class CorrelationMatrix(BaseModel):
    names: List[str]
    cells: List[List[Optional[CorrelationResult]]]

    @model_validator(mode="after")
    def _check_square(self):
        if len(self.cells) != len(self.names) or any(len(r) != len(self.names) for r in self.cells):
            raise ValueError("La matriz debe ser cuadrada")
        return self


class FiveNumberSummary(BaseModel):
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float


class BoxplotGroup(BaseModel):
    label: str
    values: List[float]
    summary: FiveNumberSummary


class ErrorTableRow(BaseModel):
    """Errores fuera de fold de un modelo combinado (conjunto de features + learner)."""
    feature_set: str
    learner: str
    measure: str
    report: Optional[ErrorReport] = None
    pearson: Optional[CorrelationResult] = None
    kendall: Optional[CorrelationResult] = None
