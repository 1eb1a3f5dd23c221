# src/qpplab/schemas/retrieval.py
from typing import Dict, Iterable, List, Mapping, NamedTuple, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator


class ScoredDoc(NamedTuple):
    doc_id: str
    rank: int
    score: float


def _check_query_id(qid: str) -> str:
    if not qid or any(ch.isspace() for ch in qid):
        raise ValueError(f"Identificador de consulta inválido: {qid!r}")
    return qid


# ============================================================================
# RunSet - listas ordenadas por consulta
# ============================================================================

class RunSet(BaseModel):
    """
    Resultado de un sistema: por consulta, documentos ordenados por score
    descendente y doc_id ascendente en caso de empate; rangos 1..n.
    """
    run_tag: str
    entries: Dict[str, Tuple[ScoredDoc, ...]]

    model_config = ConfigDict(frozen=True)

    @field_validator("entries")
    @classmethod
    def _check_entries(cls, entries: Dict[str, Tuple[ScoredDoc, ...]]):
        for qid, docs in entries.items():
            _check_query_id(qid)
            seen = set()
            for position, doc in enumerate(docs, start=1):
                if doc.doc_id in seen:
                    raise ValueError(f"Documento repetido {doc.doc_id!r} en la consulta {qid!r}")
                seen.add(doc.doc_id)
                if doc.rank != position:
                    raise ValueError(f"Rangos no contiguos en la consulta {qid!r}")
                if position > 1:
                    prev = docs[position - 2]
                    if (-prev.score, prev.doc_id) > (-doc.score, doc.doc_id):
                        raise ValueError(f"Consulta {qid!r} no está ordenada por (score desc, doc_id asc)")
        return entries

    @classmethod
    def from_scores(cls, run_tag: str, scores: Mapping[str, Iterable[Tuple[str, float]]]) -> "RunSet":
        """Construye el RunSet reordenando cada consulta y reasignando rangos."""
        entries: Dict[str, Tuple[ScoredDoc, ...]] = {}
        for qid in sorted(scores):
            ordered = sorted(scores[qid], key=lambda item: (-item[1], item[0]))
            entries[qid] = tuple(
                ScoredDoc(doc_id, rank, float(score))
                for rank, (doc_id, score) in enumerate(ordered, start=1)
            )
        return cls(run_tag=run_tag, entries=entries)

    def query_ids(self) -> List[str]:
        return sorted(self.entries)

    def docs(self, qid: str) -> Tuple[ScoredDoc, ...]:
        return self.entries.get(qid, ())

    def ranking(self, qid: str) -> List[str]:
        return [doc.doc_id for doc in self.docs(qid)]

    def scores(self, qid: str) -> np.ndarray:
        return np.array([doc.score for doc in self.docs(qid)], dtype=np.float64)


# ============================================================================
# QrelsSet - juicios de relevancia graduados
# ============================================================================

class QrelsSet(BaseModel):
    judgments: Dict[str, Dict[str, int]]

    model_config = ConfigDict(frozen=True)

    @field_validator("judgments")
    @classmethod
    def _check_grades(cls, judgments: Dict[str, Dict[str, int]]):
        for qid, docs in judgments.items():
            _check_query_id(qid)
            for doc_id, grade in docs.items():
                if grade < 0:
                    raise ValueError(f"Grado negativo para ({qid}, {doc_id})")
        return judgments

    def query_ids(self) -> List[str]:
        return sorted(self.judgments)

    def for_query(self, qid: str) -> Dict[str, int]:
        return self.judgments.get(qid, {})

    def grade(self, qid: str, doc_id: str) -> int:
        return self.judgments.get(qid, {}).get(doc_id, 0)


class TermStat(NamedTuple):
    term: str
    tcf: int


class QueryTermStats(BaseModel):
    """Términos de cada consulta con su frecuencia en el corpus (tcf)."""
    terms: Dict[str, Tuple[TermStat, ...]]

    model_config = ConfigDict(frozen=True)

    @field_validator("terms")
    @classmethod
    def _check_terms(cls, terms: Dict[str, Tuple[TermStat, ...]]):
        for qid, stats in terms.items():
            _check_query_id(qid)
            names = [stat.term for stat in stats]
            if len(set(names)) != len(names):
                raise ValueError(f"Términos repetidos en la consulta {qid!r}")
            if any(stat.tcf < 0 for stat in stats):
                raise ValueError(f"tcf negativo en la consulta {qid!r}")
        return terms

    def query_ids(self) -> List[str]:
        return sorted(self.terms)


class CorpusScoreTable(BaseModel):
    """Score de cada consulta contra el corpus completo (s(D))."""
    scores: Dict[str, float]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_finite(self):
        for qid, value in self.scores.items():
            _check_query_id(qid)
            if not np.isfinite(value):
                raise ValueError(f"Score de corpus no finito para {qid!r}")
        return self

    def query_ids(self) -> List[str]:
        return sorted(self.scores)
