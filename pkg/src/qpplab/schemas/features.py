# src/qpplab/schemas/features.py
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator


class Provenance(str, Enum):
    computed = "computed"
    ingested = "ingested"


# ============================================================================
# FeatureTable - matriz de predictores indexada por consulta
# ============================================================================

class FeatureTable(BaseModel):
    """
    Valores de predictores por consulta. Cada fila tiene exactamente un valor
    por columna; `provenance` indica si la columna se calculó o se ingirió.
    """
    columns: Tuple[str, ...]
    rows: Dict[str, Tuple[float, ...]]
    provenance: Dict[str, Provenance]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_shape(self):
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("Nombres de columna repetidos")
        if set(self.provenance) != set(self.columns):
            raise ValueError("provenance debe cubrir exactamente las columnas")
        width = len(self.columns)
        for qid, values in self.rows.items():
            if len(values) != width:
                raise ValueError(f"La fila {qid!r} tiene {len(values)} valores, se esperaban {width}")
        return self

    @classmethod
    def from_columns(
        cls,
        columns: Dict[str, Dict[str, float]],
        qids: Sequence[str],
        provenance: Provenance = Provenance.computed,
    ) -> "FeatureTable":
        """Arma la tabla a partir de {columna: {qid: valor}} para las consultas dadas."""
        names = tuple(columns)
        rows = {qid: tuple(float(columns[name][qid]) for name in names) for qid in sorted(qids)}
        return cls(columns=names, rows=rows, provenance={name: provenance for name in names})

    def query_ids(self) -> List[str]:
        return sorted(self.rows)

    def value(self, qid: str, column: str) -> float:
        return self.rows[qid][self.columns.index(column)]

    def column(self, name: str, qids: Optional[Sequence[str]] = None) -> np.ndarray:
        index = self.columns.index(name)
        qids = self.query_ids() if qids is None else qids
        return np.array([self.rows[qid][index] for qid in qids], dtype=np.float64)

    def as_dict(self, name: str) -> Dict[str, float]:
        index = self.columns.index(name)
        return {qid: values[index] for qid, values in self.rows.items()}

    def matrix(self, columns: Optional[Sequence[str]] = None,
               qids: Optional[Sequence[str]] = None) -> np.ndarray:
        columns = list(self.columns) if columns is None else list(columns)
        qids = self.query_ids() if qids is None else list(qids)
        indices = [self.columns.index(name) for name in columns]
        return np.array(
            [[self.rows[qid][i] for i in indices] for qid in qids], dtype=np.float64
        ).reshape(len(qids), len(indices))

    def restrict(self, qids: Sequence[str]) -> "FeatureTable":
        return FeatureTable(
            columns=self.columns,
            rows={qid: self.rows[qid] for qid in sorted(qids)},
            provenance=dict(self.provenance),
        )


# ============================================================================
# LETOR - valores por documento y su alineación con un run
# ============================================================================

class LetorSidecar(BaseModel):
    """Valores crudos `qid docid feature value` tal como vienen del archivo."""
    feature_order: Tuple[str, ...]
    values: Dict[str, Dict[str, Dict[str, float]]]  # feature -> qid -> doc -> valor

    model_config = ConfigDict(frozen=True)

    def query_ids(self) -> List[str]:
        qids = set()
        for per_query in self.values.values():
            qids.update(per_query)
        return sorted(qids)


class LetorScores(BaseModel):
    """Valores LF_i(d, q) alineados con el top-k del run compañero."""
    feature_name: str
    values: Dict[str, Tuple[float, ...]]

    model_config = ConfigDict(frozen=True)
