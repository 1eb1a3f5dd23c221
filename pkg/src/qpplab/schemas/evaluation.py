# src/qpplab/schemas/evaluation.py
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator


class EvalTable(BaseModel):
    """Medidas de efectividad por consulta, todas en [0, 1]."""
    measures: Tuple[str, ...]
    rows: Dict[str, Tuple[float, ...]]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_values(self):
        if len(set(self.measures)) != len(self.measures):
            raise ValueError("Medidas repetidas")
        for qid, values in self.rows.items():
            if len(values) != len(self.measures):
                raise ValueError(f"La fila {qid!r} no tiene un valor por medida")
            for value in values:
                if not 0.0 <= value <= 1.0:
                    raise ValueError(f"Valor fuera de [0,1] en la fila {qid!r}: {value}")
        return self

    def query_ids(self) -> List[str]:
        return sorted(self.rows)

    def column(self, measure: str, qids: Optional[Sequence[str]] = None) -> np.ndarray:
        index = self.measures.index(measure)
        qids = self.query_ids() if qids is None else qids
        return np.array([self.rows[qid][index] for qid in qids], dtype=np.float64)

    def as_dict(self, measure: str) -> Dict[str, float]:
        index = self.measures.index(measure)
        return {qid: values[index] for qid, values in self.rows.items()}

    def means(self) -> Dict[str, float]:
        """Media de cada medida, acumulada en orden de QueryId."""
        qids = self.query_ids()
        if not qids:
            return {measure: 0.0 for measure in self.measures}
        return {
            measure: math.fsum(self.rows[qid][i] for qid in qids) / len(qids)
            for i, measure in enumerate(self.measures)
        }
