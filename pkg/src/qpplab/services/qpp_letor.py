# src/qpplab/services/qpp_letor.py
"""
Predictores a partir de features LETOR resumidas.

Para cada consulta q y feature LF_i, los valores del top-k se resumen con
una función (Min, Max, Mean, cuartiles, Std, Var, Sum) y se dividen por N_q,
el número de términos efectivos de la consulta (tcf > 0).
"""

import logging
from typing import Dict, List, Sequence, Union

import numpy as np

from qpplab.core.errors import DegenerateQueryError, MissingQueryError, SampleSizeError
from qpplab.core.parallel import parallel_map
from qpplab.schemas.features import FeatureTable, LetorScores, Provenance
from qpplab.schemas.predictors import Aggregator
from qpplab.schemas.retrieval import QueryTermStats, RunSet
from qpplab.services.corpus_io import effective_term_count

logger = logging.getLogger(__name__)

DEFAULT_AGGREGATOR = Aggregator.Mean

_QUANTILES = {Aggregator.Q1: 0.25, Aggregator.Median: 0.5, Aggregator.Q3: 0.75}


def summarize(values: Sequence[float], agg: Union[Aggregator, str]) -> float:
    """Cuartiles por interpolación lineal entre rangos; Std y Var poblacionales."""
    agg = Aggregator(agg)
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        raise SampleSizeError(f"No se puede resumir con {agg.value} una secuencia vacía")

    if agg == Aggregator.Min:
        return float(np.min(data))
    if agg == Aggregator.Max:
        return float(np.max(data))
    if agg == Aggregator.Mean:
        return float(np.mean(data))
    if agg in _QUANTILES:
        return float(np.quantile(data, _QUANTILES[agg], method="linear"))
    if agg == Aggregator.Std:
        return float(np.std(data))
    if agg == Aggregator.Var:
        return float(np.var(data))
    return float(np.sum(data))


def slf(values: Sequence[float], agg: Union[Aggregator, str], n_effective: int) -> float:
    """
    summarize(values, agg) / N_q. Si el cociente redondeado no cumple
    slf * N_q == summarize y un float vecino sí lo cumple, se devuelve el vecino.
    """
    if n_effective < 1:
        raise DegenerateQueryError(None)
    total = summarize(values, agg)
    quotient = total / n_effective
    if quotient * n_effective == total:
        return quotient
    for direction in (np.inf, -np.inf):
        neighbour = float(np.nextafter(quotient, direction))
        if neighbour * n_effective == total:
            return neighbour
    return quotient


def column_name(feature: str, agg: Union[Aggregator, str]) -> str:
    return f"{feature}.{Aggregator(agg).value}"


def compute_letor(
    run: RunSet,
    scores: Sequence[LetorScores],
    term_stats: QueryTermStats,
    agg: Union[Aggregator, str, Sequence[Union[Aggregator, str]]] = DEFAULT_AGGREGATOR,
    k: int = 100,
    threads: int = 1,
) -> FeatureTable:
    """
    Una columna `<feature>.<agg>` por feature y agregador, en el orden
    declarado (feature primero, luego agregador).

    Raises:
        MissingQueryError: una consulta del run no tiene valores para alguna feature
        DegenerateQueryError: N_q = 0 para alguna consulta
    """
    aggregators: List[Aggregator] = (
        [Aggregator(agg)] if isinstance(agg, (Aggregator, str)) else [Aggregator(a) for a in agg]
    )
    qids = run.query_ids()

    for letor in scores:
        for qid in qids:
            if qid not in letor.values:
                raise MissingQueryError(qid, f"los valores LETOR de {letor.feature_name}")

    def row(qid: str) -> Dict[str, float]:
        try:
            n_effective = effective_term_count(term_stats, qid)
        except DegenerateQueryError:
            logger.error(f"Consulta {qid} sin términos efectivos: no se puede normalizar")
            raise
        values: Dict[str, float] = {}
        for letor in scores:
            top = letor.values[qid][:k]
            for aggregator in aggregators:
                values[column_name(letor.feature_name, aggregator)] = slf(top, aggregator, n_effective)
        return values

    rows = parallel_map(row, qids, threads)
    names = [column_name(letor.feature_name, a) for letor in scores for a in aggregators]
    columns = {name: {qid: r[name] for qid, r in zip(qids, rows)} for name in names}
    logger.info(f"Features LETOR normalizadas: {', '.join(names)} ({len(qids)} consultas)")
    return FeatureTable.from_columns(columns, qids, Provenance.computed)
