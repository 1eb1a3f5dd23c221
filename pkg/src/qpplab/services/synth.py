# src/qpplab/services/synth.py
"""
Generador de colecciones sintéticas
===================================
Produce, a partir de una semilla, todo lo que el laboratorio necesita para
un experimento de escritorio: dos runs con efectividad distinta por
consulta, un run de feedback, qrels, sidecars (scores de corpus,
estadísticas de términos, valores LETOR) y un predictor cuya correlación con
el NDCG real la controla `informativeness`:

    P.synth = informativeness * NDCG + (1 - informativeness) * U(0, 1)

Generador: numpy.random.default_rng(seed) (PCG64). Las consultas se generan
en orden y cada paso consume el generador en el mismo orden, así la misma
semilla produce los mismos archivos byte a byte.
"""

import json
import logging
from typing import Dict, List

import numpy as np

from qpplab import __version__
from qpplab.schemas.features import FeatureTable, Provenance
from qpplab.schemas.predictors import DEFAULT_LETOR_FEATURES
from qpplab.schemas.retrieval import QrelsSet, RunSet
from qpplab.schemas.synth import SynthParams
from qpplab.services.corpus_io import feature_table_to_tsv, write_run
from qpplab.services.effectiveness import evaluate_run

logger = logging.getLogger(__name__)

RUN_R1 = "run_r1.txt"
RUN_R2 = "run_r2.txt"
RUN_R1_FEEDBACK = "run_r1_fb.txt"
QRELS = "qrels.txt"
CORPUS_SCORES = "corpus_scores.tsv"
TERM_STATS = "term_stats.tsv"
LETOR = "letor.tsv"
PREDICTOR_R1 = "predictor_r1.tsv"
PREDICTOR_R2 = "predictor_r2.tsv"
MANIFEST = "manifest.json"

PREDICTOR_COLUMN = "P.synth"
SCORE_OFFSET = 10.0
MAX_TERMS = 4


def _query_ids(n: int) -> List[str]:
    width = len(str(n))
    return [f"q{i:0{width}d}" for i in range(1, n + 1)]


def _doc_ids(n: int) -> List[str]:
    width = len(str(n))
    return [f"d{j:0{width}d}" for j in range(1, n + 1)]


def _system_scores(rng: np.random.Generator, grades: np.ndarray, quality: float) -> np.ndarray:
    # Más calidad = los relevantes se separan más del resto
    return rng.normal(loc=2.0 * quality * grades, scale=1.0) + SCORE_OFFSET


def generate_collection(params: SynthParams) -> Dict[str, str]:
    """
    Devuelve {nombre de archivo: contenido}. Los textos no llevan cabecera;
    la agrega el comando que los escribe.
    """
    rng = np.random.default_rng(params.seed)
    qids = _query_ids(params.n_queries)
    docs = _doc_ids(params.n_docs)

    judgments: Dict[str, Dict[str, int]] = {}
    r1: Dict[str, List] = {}
    r2: Dict[str, List] = {}
    feedback: Dict[str, List] = {}
    corpus_lines: List[str] = ["qid\ts_corpus\n"]
    term_lines: List[str] = ["qid\tterm\ttcf\n"]
    letor_lines: List[str] = ["qid\tdocid\tfeature\tvalue\n"]

    max_relevant = max(1, params.n_docs // 4)
    for qid in qids:
        n_relevant = int(rng.integers(1, max_relevant + 1))
        relevant = rng.choice(params.n_docs, size=n_relevant, replace=False)
        grades = np.zeros(params.n_docs)
        grades[relevant] = rng.integers(1, 3, size=n_relevant)
        judgments[qid] = {docs[j]: int(grades[j]) for j in range(params.n_docs)}

        quality_r1, quality_r2 = (float(v) for v in rng.uniform(0.0, 1.0, size=2))
        scores_r1 = _system_scores(rng, grades, quality_r1)
        scores_r2 = _system_scores(rng, grades, quality_r2)
        scores_fb = scores_r1 + rng.normal(0.0, 0.5, size=params.n_docs)
        r1[qid] = list(zip(docs, scores_r1.tolist()))
        r2[qid] = list(zip(docs, scores_r2.tolist()))
        feedback[qid] = list(zip(docs, scores_fb.tolist()))

        s_corpus = float(rng.uniform(1.0, SCORE_OFFSET))
        corpus_lines.append(f"{qid}\t{s_corpus!r}\n")

        n_terms = int(rng.integers(1, MAX_TERMS + 1))
        tcfs = rng.integers(0, 1000, size=n_terms)
        tcfs[0] = max(1, int(tcfs[0]))
        term_lines.extend(f"{qid}\tt{k + 1}\t{int(tcf)}\n" for k, tcf in enumerate(tcfs))

        for index, feature in enumerate(DEFAULT_LETOR_FEATURES):
            noise = np.abs(rng.normal(0.0, 0.1, size=params.n_docs))
            values = np.maximum(scores_r1 - SCORE_OFFSET, 0.0) * (index + 1) * 0.5 + noise
            letor_lines.extend(f"{qid}\t{docs[j]}\t{feature}\t{float(values[j])!r}\n" for j in range(params.n_docs))

    run_r1 = RunSet.from_scores("R1", r1)
    run_r2 = RunSet.from_scores("R2", r2)
    run_fb = RunSet.from_scores("R1fb", feedback)
    qrels = QrelsSet(judgments=judgments)

    ndcg_r1 = evaluate_run(run_r1, qrels, ["NDCG"])
    ndcg_r2 = evaluate_run(run_r2, qrels, ["NDCG"])

    def predictor(ndcg: Dict[str, float]) -> FeatureTable:
        noise = rng.uniform(0.0, 1.0, size=len(qids))
        inf = params.informativeness
        values = {qid: inf * ndcg[qid] + (1.0 - inf) * float(u) for qid, u in zip(qids, noise)}
        return FeatureTable.from_columns({PREDICTOR_COLUMN: values}, qids, Provenance.computed)

    predictor_r1 = predictor(ndcg_r1.as_dict("NDCG"))
    predictor_r2 = predictor(ndcg_r2.as_dict("NDCG"))

    qrels_lines = [
        f"{qid} 0 {doc} {grade}\n"
        for qid in qids
        for doc, grade in sorted(judgments[qid].items())
        if grade > 0
    ]

    manifest = {
        "generator": f"qpplab {__version__}",
        "rng": "numpy.random.default_rng (PCG64)",
        "params": params.model_dump(),
        "predictor_column": PREDICTOR_COLUMN,
        "letor_features": list(DEFAULT_LETOR_FEATURES),
        "mean_ndcg": {"R1": ndcg_r1.means()["NDCG"], "R2": ndcg_r2.means()["NDCG"]},
        "files": [RUN_R1, RUN_R2, RUN_R1_FEEDBACK, QRELS, CORPUS_SCORES, TERM_STATS, LETOR,
                  PREDICTOR_R1, PREDICTOR_R2],
    }
    logger.info(
        f"Colección sintética generada: {len(qids)} consultas, {params.n_docs} documentos, "
        f"informativeness={params.informativeness}"
    )

    return {
        RUN_R1: write_run(run_r1),
        RUN_R2: write_run(run_r2),
        RUN_R1_FEEDBACK: write_run(run_fb),
        QRELS: "".join(qrels_lines),
        CORPUS_SCORES: "".join(corpus_lines),
        TERM_STATS: "".join(term_lines),
        LETOR: "".join(letor_lines),
        PREDICTOR_R1: feature_table_to_tsv(predictor_r1),
        PREDICTOR_R2: feature_table_to_tsv(predictor_r2),
        MANIFEST: json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    }
