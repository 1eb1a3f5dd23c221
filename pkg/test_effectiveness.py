"""
Pruebas de las medidas de efectividad contra ejemplos calculados a mano y
contra implementaciones de fuerza bruta escritas desde la definición.
"""

import logging
import math

import numpy as np
import pytest

from qpplab.core.errors import UsageError
from qpplab.schemas.retrieval import QrelsSet, RunSet
from qpplab.services.corpus_io import parse_eval_table
from qpplab.services.effectiveness import (
    average_precision,
    eval_table_to_tsv,
    evaluate_run,
    mrr_at,
    ndcg,
    parse_measure,
    precision_at,
)


# ============================================================
# ORÁCULOS DE FUERZA BRUTA
# ============================================================

def oracle_ndcg(grades_in_rank_order, all_grades, cutoff=None):
    depth = len(grades_in_rank_order) if cutoff is None else cutoff
    gains = list(grades_in_rank_order)[:depth]
    dcg = 0.0
    for i in range(len(gains)):
        dcg += gains[i] * (1.0 / np.log2(i + 2.0))
    best = sorted([g for g in all_grades if g > 0])[::-1]
    if cutoff is not None:
        best = best[:cutoff]
    if not best:
        return 0.0
    idcg = 0.0
    for i in range(len(best)):
        idcg += best[i] * (1.0 / np.log2(i + 2.0))
    return dcg / idcg


def oracle_ap(binary_in_rank_order, n_relevant):
    if n_relevant == 0:
        return 0.0
    precisions = []
    for i, rel in enumerate(binary_in_rank_order):
        if rel:
            precisions.append(sum(binary_in_rank_order[: i + 1]) / (i + 1))
    return sum(precisions) / n_relevant


def oracle_p(binary_in_rank_order, k):
    padded = list(binary_in_rank_order) + [0] * k
    return sum(padded[:k]) / k


def oracle_rr(binary_in_rank_order, k):
    ranks = [i + 1 for i, rel in enumerate(binary_in_rank_order[:k]) if rel]
    return 1.0 / min(ranks) if ranks else 0.0


# ============================================================
# EJEMPLOS
# ============================================================

def test_ndcg_hand_example():
    judgments = {"a": 1, "c": 1}
    value = ndcg(["a", "b", "c"], judgments)
    expected = 1.5 / (1.0 + 1.0 / math.log2(3))
    assert value == pytest.approx(expected, abs=1e-12)
    assert value == pytest.approx(0.91972, abs=1e-5)


def test_ndcg_ideal_is_one():
    judgments = {"a": 3, "b": 2, "c": 1, "d": 0}
    assert ndcg(["a", "b", "c", "d"], judgments) == 1.0
    assert average_precision(["a", "b", "c", "d"], judgments) == 1.0


def test_zero_relevant_scores_zero_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        assert ndcg(["a"], {"a": 0}, qid="q9") == 0.0
        assert average_precision(["a"], {}, qid="q9") == 0.0
    assert len([r for r in caplog.records if "q9" in r.message]) == 2


def test_average_precision_examples():
    assert average_precision(["a", "b", "c"], {"a": 1, "c": 1}) == pytest.approx((1 + 2 / 3) / 2)
    assert average_precision(["x", "y"], {"a": 1}) == 0.0


def test_precision_examples():
    ranking = [f"d{i}" for i in range(10)]
    assert precision_at(ranking, {d: 1 for d in ranking}, 10) == 1.0
    assert precision_at(ranking, {"d0": 1, "d4": 2, "d9": 1}, 10) == pytest.approx(0.3)
    assert precision_at(ranking[:5], {d: 1 for d in ranking[:5]}, 10) == 0.5


def test_mrr_examples():
    ranking = [f"d{i}" for i in range(1, 13)]
    assert mrr_at(ranking, {"d3": 1}, 10) == pytest.approx(1 / 3)
    assert mrr_at(ranking, {"d11": 1}, 10) == 0.0
    assert mrr_at(ranking, {"d1": 2}, 10) == 1.0


def test_swap_with_lower_grade_never_decreases_ndcg():
    judgments = {"a": 1, "b": 3, "c": 0, "d": 2}
    before = ndcg(["a", "b", "c", "d"], judgments)
    after = ndcg(["b", "a", "c", "d"], judgments)
    assert after >= before


def test_cutoff_measures_ignore_tail_permutations(rng):
    judgments = {f"d{i}": int(g) for i, g in enumerate(rng.integers(0, 3, size=20))}
    ranking = [f"d{i}" for i in range(20)]
    tail = ranking[10:]
    permuted = ranking[:10] + [tail[i] for i in rng.permutation(len(tail))]
    assert precision_at(ranking, judgments, 10) == precision_at(permuted, judgments, 10)
    assert mrr_at(ranking, judgments, 10) == mrr_at(permuted, judgments, 10)


@pytest.mark.parametrize("name,canonical", [("ndcg", "NDCG"), ("NDCG@5", "NDCG@5"), ("map", "MAP"),
                                            ("p@10", "P@10"), ("MRR@10", "MRR@10")])
def test_parse_measure(name, canonical):
    assert parse_measure(name).name == canonical


@pytest.mark.parametrize("name", ["P", "MRR", "MAP@5", "ERR@10", "P@0"])
def test_parse_measure_rejects(name):
    with pytest.raises(UsageError):
        parse_measure(name)


# ============================================================
# EQUIVALENCIA CON LOS ORÁCULOS
# ============================================================

def test_measures_match_brute_force_oracles():
    rng = np.random.default_rng(2024)
    for _ in range(10_000):
        n_docs = int(rng.integers(1, 9))
        docs = [f"d{i}" for i in range(n_docs)]
        grades = rng.integers(0, 4, size=n_docs)
        judgments = {doc: int(g) for doc, g in zip(docs, grades)}
        # Algunos relevantes pueden no estar recuperados
        n_retrieved = int(rng.integers(0, n_docs + 1))
        ranking = [docs[i] for i in rng.permutation(n_docs)[:n_retrieved]]
        in_order = [judgments[d] for d in ranking]
        binary = [1 if g > 0 else 0 for g in in_order]
        n_relevant = sum(1 for g in grades if g > 0)

        assert ndcg(ranking, judgments, warn=False) == pytest.approx(oracle_ndcg(in_order, grades), abs=1e-12)
        assert ndcg(ranking, judgments, 3, warn=False) == pytest.approx(oracle_ndcg(in_order, grades, 3), abs=1e-12)
        assert average_precision(ranking, judgments, warn=False) == pytest.approx(
            oracle_ap(binary, n_relevant), abs=1e-12)
        assert precision_at(ranking, judgments, 10) == pytest.approx(oracle_p(binary, 10), abs=1e-12)
        assert mrr_at(ranking, judgments, 10) == pytest.approx(oracle_rr(binary, 10), abs=1e-12)


# ============================================================
# EVALUACIÓN DE RUNS
# ============================================================

def _run(scores):
    return RunSet.from_scores("sys", scores)


def test_evaluate_run_single_query_p10():
    docs = [(f"d{i}", float(10 - i)) for i in range(10)]
    qrels = QrelsSet(judgments={"q1": {"d0": 1, "d5": 1, "d9": 1}})
    table = evaluate_run(_run({"q1": docs}), qrels, ["P@10"])
    assert table.rows["q1"] == pytest.approx((0.3,))
    assert table.means()["P@10"] == pytest.approx(0.3)


def test_evaluate_run_mean_of_two_queries():
    run = _run({"q1": [("a", 1.0)], "q2": [("b", 1.0)]})
    qrels = QrelsSet(judgments={"q1": {"a": 1}, "q2": {"x": 1}})
    table = evaluate_run(run, qrels, ["NDCG"])
    assert table.means()["NDCG"] == 0.5


def test_evaluate_run_ideal_run():
    qrels = QrelsSet(judgments={"q1": {"a": 2, "b": 1, "c": 0}, "q2": {"x": 1, "y": 3}})
    run = _run({"q1": [("a", 3.0), ("b", 2.0), ("c", 1.0)], "q2": [("y", 2.0), ("x", 1.0)]})
    table = evaluate_run(run, qrels, ["NDCG", "MAP"])
    for qid in table.query_ids():
        assert table.rows[qid] == (1.0, 1.0)


def test_evaluate_run_independent_of_threads(rng):
    scores = {f"q{i:02d}": [(f"d{j}", float(rng.normal())) for j in range(15)] for i in range(30)}
    qrels = QrelsSet(judgments={q: {f"d{j}": int(rng.integers(0, 3)) for j in range(15)} for q in scores})
    one = evaluate_run(_run(scores), qrels, threads=1)
    four = evaluate_run(_run(scores), qrels, threads=4)
    assert eval_table_to_tsv(one) == eval_table_to_tsv(four)


def test_eval_table_tsv_has_mean_row_and_rereads():
    run = _run({"q1": [("a", 1.0)], "q2": [("b", 1.0)]})
    qrels = QrelsSet(judgments={"q1": {"a": 1}, "q2": {"b": 1, "c": 1}})
    table = evaluate_run(run, qrels, ["NDCG", "P@10"])
    text = eval_table_to_tsv(table)
    assert text.splitlines()[0] == "qid\tNDCG\tP@10"
    assert text.splitlines()[-1].startswith("MEAN\t")
    assert parse_eval_table(text) == table
