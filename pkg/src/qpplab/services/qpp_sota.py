# src/qpplab/services/qpp_sota.py
"""
Predictores post-recuperación clásicos: UQC, NQC, WIG y QF.

Todos trabajan sobre la lista de scores del run (ya ordenada de forma
descendente); la desviación estándar es poblacional.
"""

import logging
import math
from typing import Dict, Optional, Sequence

import numpy as np

from qpplab.core.errors import ConfigurationError, DivisionByZeroError, MissingQueryError
from qpplab.core.parallel import parallel_map
from qpplab.schemas.features import FeatureTable, Provenance
from qpplab.schemas.predictors import PredictorConfig, WigVariant
from qpplab.schemas.retrieval import CorpusScoreTable, QueryTermStats, RunSet
from qpplab.services.corpus_io import align_query_sets, effective_term_count

logger = logging.getLogger(__name__)


def _top(scores: Sequence[float], k: int) -> np.ndarray:
    values = np.asarray(scores, dtype=np.float64)
    if values.size == 0:
        raise ConfigurationError("Lista de scores vacía")
    return values[:k]


def uqc(scores: Sequence[float], k: int) -> float:
    return float(np.std(_top(scores, k)))


def nqc(scores: Sequence[float], k: int, s_corpus: float, qid: Optional[str] = None) -> float:
    if s_corpus == 0:
        raise DivisionByZeroError(
            f"Score de corpus nulo para la consulta {qid or '?'}: NQC no definido",
            {"query_id": qid},
        )
    return uqc(scores, k) / abs(s_corpus)


def wig(
    scores: Sequence[float],
    k: int,
    variant: WigVariant = WigVariant.mean_diff,
    s_corpus: Optional[float] = None,
    n_terms: Optional[int] = None,
) -> float:
    """
    mean_diff: media del top-k menos la media de todos los scores recuperados.
    classic: (1/k) * sum((score_i - s_corpus) / sqrt(n_terms)) sobre el top-k.
    """
    top = _top(scores, k)
    if variant == WigVariant.mean_diff:
        return float(np.mean(top) - np.mean(np.asarray(scores, dtype=np.float64)))

    if s_corpus is None or n_terms is None:
        raise ConfigurationError(
            "WIG clásico requiere score de corpus y número de términos",
            {"s_corpus": s_corpus, "n_terms": n_terms},
        )
    return float(np.mean((top - s_corpus) / math.sqrt(n_terms)))


def qf(run_original: RunSet, run_feedback: RunSet, qid: str, depth: int) -> float:
    """Solapamiento del top-depth de ambos runs; el divisor es siempre `depth`."""
    if qid not in run_original.entries:
        raise MissingQueryError(qid, f"el run '{run_original.run_tag}'")
    if qid not in run_feedback.entries:
        raise MissingQueryError(qid, f"el run de feedback '{run_feedback.run_tag}'")
    top_a = set(run_original.ranking(qid)[:depth])
    top_b = set(run_feedback.ranking(qid)[:depth])
    return len(top_a & top_b) / depth


# ============================================================
# TABLA DE PREDICTORES
# ============================================================

def compute_sota(
    run: RunSet,
    config: PredictorConfig,
    corpus_scores: CorpusScoreTable,
    term_stats: Optional[QueryTermStats] = None,
    feedback_run: Optional[RunSet] = None,
    threads: int = 1,
) -> FeatureTable:
    """
    Calcula UQC, NQC, WIG (y QF si hay run de feedback) para las consultas
    del run presentes en las tablas auxiliares.

    Raises:
        MissingQueryError: consulta del run ausente en los scores de corpus
    """
    needs_terms = config.wig_variant == WigVariant.classic
    if needs_terms and term_stats is None:
        raise ConfigurationError("WIG clásico requiere estadísticas de términos")

    named = [(f"run '{run.run_tag}'", run.query_ids())]
    if needs_terms:
        named.append(("estadísticas de términos", term_stats.query_ids()))
    if feedback_run is not None:
        named.append((f"run de feedback '{feedback_run.run_tag}'", feedback_run.query_ids()))
    else:
        logger.warning("Sin run de feedback: se omite la columna QF")
    qids = align_query_sets(named)

    for qid in qids:
        if qid not in corpus_scores.scores:
            raise MissingQueryError(qid, "los scores de corpus")

    def row(qid: str) -> Dict[str, float]:
        scores = [doc.score for doc in run.docs(qid)]
        s_corpus = corpus_scores.scores[qid]
        n_terms = effective_term_count(term_stats, qid) if needs_terms else None
        values = {
            "UQC": uqc(scores, config.k_uqc),
            "NQC": nqc(scores, config.k_nqc, s_corpus, qid=qid),
            "WIG": wig(scores, config.k_wig, config.wig_variant, s_corpus, n_terms),
        }
        if feedback_run is not None:
            values["QF"] = qf(run, feedback_run, qid, config.qf_depth)
        return values

    rows = parallel_map(row, qids, threads)
    names = list(rows[0]) if rows else ["UQC", "NQC", "WIG"]
    columns = {name: {qid: r[name] for qid, r in zip(qids, rows)} for name in names}
    logger.info(f"Predictores SOTA calculados para {len(qids)} consultas: {', '.join(names)}")
    return FeatureTable.from_columns(columns, qids, Provenance.computed)
