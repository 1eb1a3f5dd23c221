# src/qpplab/services/effectiveness.py
"""
Medidas de efectividad por consulta (NDCG, MAP, P@k, MRR@k).

Convenciones:
- NDCG: ganancia = grado, descuento 1/log2(rango+1), profundidad completa por defecto
- MAP, P@k, MRR@k: relevancia binaria (grado > 0)
- Consultas sin documentos relevantes puntúan 0 con advertencia
"""

import logging
import math
import re
from typing import List, Mapping, NamedTuple, Optional, Sequence, Union

from qpplab.core.errors import UsageError
from qpplab.core.output import fmt_float
from qpplab.core.parallel import parallel_map
from qpplab.schemas.evaluation import EvalTable
from qpplab.schemas.retrieval import QrelsSet, RunSet, ScoredDoc
from qpplab.services.corpus_io import MEAN_ROW, align_queries

logger = logging.getLogger(__name__)

Ranking = Sequence[Union[str, ScoredDoc]]

DEFAULT_MEASURES = ("NDCG", "MAP", "P@10", "MRR@10")


def _doc_ids(ranking: Ranking) -> List[str]:
    return [doc.doc_id if isinstance(doc, ScoredDoc) else doc for doc in ranking]


def _warn_no_relevant(qid: Optional[str], measure: str) -> None:
    logger.warning(f"Consulta {qid or '?'} sin documentos relevantes en los qrels: {measure} = 0")


# ============================================================
# MEDIDAS
# ============================================================

def ndcg(ranking: Ranking, judgments: Mapping[str, int], cutoff: Optional[int] = None,
         qid: Optional[str] = None, warn: bool = True) -> float:
    docs = _doc_ids(ranking)
    if cutoff is not None:
        docs = docs[:cutoff]

    ideal = sorted((g for g in judgments.values() if g > 0), reverse=True)
    if not ideal:
        if warn:
            _warn_no_relevant(qid, "NDCG")
        return 0.0
    if cutoff is not None:
        ideal = ideal[:cutoff]

    dcg = sum(judgments.get(doc, 0) / math.log2(rank + 1) for rank, doc in enumerate(docs, start=1))
    idcg = sum(grade / math.log2(rank + 1) for rank, grade in enumerate(ideal, start=1))
    return dcg / idcg


def average_precision(ranking: Ranking, judgments: Mapping[str, int],
                      qid: Optional[str] = None, warn: bool = True) -> float:
    """Los relevantes no recuperados aportan 0 al promedio."""
    n_relevant = sum(1 for g in judgments.values() if g > 0)
    if n_relevant == 0:
        if warn:
            _warn_no_relevant(qid, "MAP")
        return 0.0

    hits = 0
    total = 0.0
    for rank, doc in enumerate(_doc_ids(ranking), start=1):
        if judgments.get(doc, 0) > 0:
            hits += 1
            total += hits / rank
    return total / n_relevant


def precision_at(ranking: Ranking, judgments: Mapping[str, int], k: int) -> float:
    # Las posiciones que faltan hasta k cuentan como no relevantes
    hits = sum(1 for doc in _doc_ids(ranking)[:k] if judgments.get(doc, 0) > 0)
    return hits / k


def mrr_at(ranking: Ranking, judgments: Mapping[str, int], k: int) -> float:
    for rank, doc in enumerate(_doc_ids(ranking)[:k], start=1):
        if judgments.get(doc, 0) > 0:
            return 1.0 / rank
    return 0.0


# ============================================================
# NOMBRES DE MEDIDA
# ============================================================

class MeasureSpec(NamedTuple):
    name: str
    kind: str            # ndcg | map | p | mrr
    k: Optional[int]


_MEASURE_RE = re.compile(r"^(NDCG|MAP|P|MRR)(?:@(\d+))?$", re.IGNORECASE)


def parse_measure(name: str) -> MeasureSpec:
    """Acepta NDCG, NDCG@k, MAP, P@k y MRR@k."""
    match = _MEASURE_RE.match(name.strip())
    if not match:
        raise UsageError(f"Medida desconocida: {name!r}", {"measure": name})
    kind = match.group(1).lower()
    k = int(match.group(2)) if match.group(2) else None

    if kind in ("p", "mrr") and k is None:
        raise UsageError(f"La medida {name!r} requiere un corte (@k)", {"measure": name})
    if kind == "map" and k is not None:
        raise UsageError(f"MAP no admite corte: {name!r}", {"measure": name})
    if k is not None and k < 1:
        raise UsageError(f"Corte inválido en {name!r}", {"measure": name})

    canonical = kind.upper() if kind != "p" else "P"
    if k is not None:
        canonical = f"{canonical}@{k}"
    return MeasureSpec(canonical, kind, k)


def measure_value(spec: MeasureSpec, ranking: Ranking, judgments: Mapping[str, int],
                  qid: Optional[str] = None, warn: bool = True) -> float:
    if spec.kind == "ndcg":
        return ndcg(ranking, judgments, spec.k, qid=qid, warn=warn)
    if spec.kind == "map":
        return average_precision(ranking, judgments, qid=qid, warn=warn)
    if spec.kind == "p":
        return precision_at(ranking, judgments, spec.k)
    return mrr_at(ranking, judgments, spec.k)


# ============================================================
# EVALUACIÓN DE UN RUN
# ============================================================

def evaluate_run(run: RunSet, qrels: QrelsSet, measures: Sequence[str] = DEFAULT_MEASURES,
                 threads: int = 1) -> EvalTable:
    """
    Evalúa el run sobre las consultas comunes con los qrels.

    Las medias por medida (EvalTable.means) se acumulan en orden de QueryId,
    así el resultado no depende del número de hilos.
    """
    specs = [parse_measure(m) for m in measures]
    qids = align_queries(run, qrels)

    def score_query(qid: str):
        judgments = qrels.for_query(qid)
        ranking = run.ranking(qid)
        if not any(g > 0 for g in judgments.values()):
            logger.warning(f"Consulta {qid} sin documentos relevantes en los qrels: se puntúa 0")
        return tuple(measure_value(spec, ranking, judgments, qid=qid, warn=False) for spec in specs)

    rows = parallel_map(score_query, qids, threads)
    table = EvalTable(measures=tuple(spec.name for spec in specs), rows=dict(zip(qids, rows)))
    logger.info(f"Run '{run.run_tag}' evaluado en {len(qids)} consultas")
    return table


def eval_table_to_tsv(table: EvalTable) -> str:
    """Exporta la tabla con cabecera `qid` + medidas y una fila final MEAN."""
    lines = ["\t".join(("qid",) + table.measures) + "\n"]
    for qid in table.query_ids():
        lines.append("\t".join([qid] + [fmt_float(v) for v in table.rows[qid]]) + "\n")
    means = table.means()
    lines.append("\t".join([MEAN_ROW] + [fmt_float(means[m]) for m in table.measures]) + "\n")
    return "".join(lines)
