"""
Pruebas de las tablas, matrices, boxplots y resúmenes de reporting.
"""

import math

import numpy as np
import pytest

from qpplab.core.errors import ParseError, UsageError
from qpplab.schemas.evaluation import EvalTable
from qpplab.schemas.features import FeatureTable
from qpplab.schemas.reports import CorrelationRecord, CorrelationReport, ErrorTableRow
from qpplab.schemas.routing import PairedComparison
from qpplab.schemas.stats import CorrelationResult, Marker
from qpplab.services.reporting import (
    BEATS_BOTH,
    NOT_AVAILABLE,
    RECORD_COLUMNS,
    anova_from_records,
    boxplot_data,
    correlation_matrix,
    correlation_table,
    format_cell,
    merge_reports,
    parse_records,
    records_to_tsv,
    render_anova,
    render_boxplots,
    render_correlation_table,
    render_error_table,
    render_matrix,
    render_paired_tests,
    render_routing_summary,
    scatter_export,
)
from qpplab.services.selective import compare_with_rankers, oracle_route, threshold_policy
from qpplab.services.statlab import regression_errors

QIDS = ["q1", "q2", "q3", "q4", "q5", "q6"]
NDCG = [0.1, 0.3, 0.2, 0.6, 0.5, 0.9]
AP = [0.2, 0.1, 0.4, 0.3, 0.7, 0.6]


def _inputs():
    features = FeatureTable.from_columns({
        "UQC": {q: 2 * v + 1 for q, v in zip(QIDS, NDCG)},
        "NQC": {q: v for q, v in zip(QIDS, [3.0, 1.0, 4.0, 1.5, 5.0, 9.0])},
        "CONST": {q: 0.5 for q in QIDS},
    }, QIDS)
    evals = EvalTable(measures=("NDCG", "AP"), rows={q: (n, a) for q, n, a in zip(QIDS, NDCG, AP)})
    return features, evals


def _result(value, p=0.5):
    marker = Marker.ddagger if p < 0.01 else Marker.dagger if p < 0.05 else Marker.none
    return CorrelationResult(coefficient=value, p_value=p, n=10, marker=marker)


# ============================================================
# TABLAS DE CORRELACIÓN
# ============================================================

def test_correlation_table_cell_order():
    features, evals = _inputs()
    report = correlation_table(features, evals, ["pearson", "kendall"], threads=3)
    keys = [(r.measure, r.coefficient, r.predictor) for r in report.records]
    assert keys[:3] == [("NDCG", "pearson", "UQC"), ("NDCG", "pearson", "NQC"), ("NDCG", "pearson", "CONST")]
    assert keys[3] == ("NDCG", "kendall", "UQC")
    assert len(keys) == 2 * 2 * 3


def test_correlation_table_undefined_cell_is_na(caplog):
    features, evals = _inputs()
    report = correlation_table(features, evals)
    const = [r for r in report.records if r.predictor == "CONST"]
    assert all(r.result is None for r in const)
    assert any("CONST" in r.message for r in caplog.records)
    text = render_correlation_table(report, "markdown")
    assert NOT_AVAILABLE in text


def test_correlation_table_markdown_markers():
    features, evals = _inputs()
    text = render_correlation_table(correlation_table(features, evals), "markdown")
    lines = text.splitlines()
    assert lines[0] == "| Predictor | NDCG r | AP r |"
    assert lines[2].startswith("| UQC | 1.000‡ |")


def test_correlation_table_independent_noise_is_rarely_marked():
    """Predictor y medida independientes: sin marcador en al menos 18 de 20 semillas."""
    unmarked = 0
    for seed in range(20):
        rng = np.random.default_rng(500 + seed)
        qids = [f"q{i:03d}" for i in range(100)]
        features = FeatureTable.from_columns({"P": dict(zip(qids, rng.normal(size=100).tolist()))}, qids)
        evals = EvalTable(measures=("NDCG",), rows={q: (float(v),) for q, v in zip(qids, rng.uniform(size=100))})
        (record,) = correlation_table(features, evals).records
        if record.result.marker == Marker.none:
            unmarked += 1
    assert unmarked >= 18


def test_correlation_table_rejects_unknown_coefficient():
    features, evals = _inputs()
    with pytest.raises(UsageError):
        correlation_table(features, evals, "spearman")


def test_group_label_with_ranker_and_collection():
    features, evals = _inputs()
    report = correlation_table(features, evals, ranker="BM25", collection="Robust04")
    header = render_correlation_table(report).splitlines()[0]
    assert "BM25 Robust04 NDCG r" in header


def test_format_cell():
    assert format_cell(None) == NOT_AVAILABLE
    assert format_cell(_result(0.2549, p=0.03)) == "0.255†"
    assert format_cell(_result(-0.1, p=0.4)) == "-0.100"


def test_records_round_trip():
    features, evals = _inputs()
    report = correlation_table(features, evals, ["pearson", "kendall"], ranker="QL", collection="GOV2")
    text = records_to_tsv(report)
    assert text.splitlines()[0] == "\t".join(RECORD_COLUMNS)
    assert parse_records(text) == report
    assert render_correlation_table(report, "tsv") == text


def test_parse_records_errors():
    with pytest.raises(ParseError):
        parse_records("ranker\tcollection\n")
    header = "\t".join(RECORD_COLUMNS) + "\n"
    with pytest.raises(ParseError) as exc:
        parse_records(header + "a\tb\tc\n", source="recs.tsv")
    assert exc.value.line == 2
    with pytest.raises(ParseError):
        parse_records(header + "-\t-\tUQC\tNDCG\tpearson\t0.5\t0.001\t10\tnone\n")


def test_merge_reports_keeps_order():
    a = CorrelationReport(records=[CorrelationRecord(predictor="UQC", measure="NDCG", coefficient="pearson")])
    b = CorrelationReport(records=[CorrelationRecord(predictor="NQC", measure="NDCG", coefficient="pearson")])
    assert merge_reports([a, b]).rows() == ["UQC", "NQC"]


def test_unknown_format():
    features, evals = _inputs()
    with pytest.raises(UsageError):
        render_correlation_table(correlation_table(features, evals), "html")


# ============================================================
# MATRIZ
# ============================================================

def test_correlation_matrix_symmetric_with_unit_diagonal():
    features, evals = _inputs()
    matrix = correlation_matrix(features, evals)
    assert matrix.names == ["UQC", "NQC", "CONST", "NDCG", "AP"]
    for i, name in enumerate(matrix.names):
        if name == "CONST":
            assert matrix.cells[i][i] is None
            continue
        assert matrix.cells[i][i].coefficient == 1.0
        for j in range(len(matrix.names)):
            assert matrix.cells[i][j] == matrix.cells[j][i]
    assert matrix.cells[0][3].coefficient == pytest.approx(1.0)
    tsv = render_matrix(matrix, "tsv").splitlines()
    assert tsv[0] == "column\tUQC\tNQC\tCONST\tNDCG\tAP"
    assert tsv[3].split("\t")[3] == NOT_AVAILABLE


# ============================================================
# BOXPLOTS Y DISPERSIÓN
# ============================================================

def test_boxplot_groups_sorted_by_median():
    correlations = [
        ("BM25", "Robust", 0.2), ("BM25", "GOV2", 0.3), ("BM25", "WT10g", 0.1),
        ("QL", "Robust", 0.5), ("QL", "GOV2", 0.6),
        ("DPH", "Robust", 0.35),
    ]
    groups = boxplot_data(correlations, "ranker")
    assert [g.label for g in groups] == ["QL", "DPH", "BM25"]
    bm25 = groups[-1]
    assert (bm25.summary.minimum, bm25.summary.median, bm25.summary.maximum) == pytest.approx((0.1, 0.2, 0.3))
    by_collection = boxplot_data(correlations, "collection")
    assert [g.label for g in by_collection] == ["GOV2", "Robust", "WT10g"]
    lines = render_boxplots(groups, "tsv").splitlines()
    assert lines[0] == "group\tn\tmin\tq1\tmedian\tq3\tmax"
    assert lines[3].startswith("BM25\t3\t")
    with pytest.raises(UsageError):
        boxplot_data(correlations, "measure")


def test_scatter_export_header():
    predicted = {"q1": 0.1, "q2": 0.2, "q3": 0.3, "q4": 0.4}
    actual = {q: 2 * v for q, v in predicted.items()}
    text = scatter_export(predicted, actual, "UQC", "NDCG")
    lines = text.splitlines()
    assert lines[0].startswith("# UQC vs NDCG: r=1.000 p=")
    assert lines[0].endswith("n=4")
    assert lines[1] == "0.1\t0.2"
    assert len(lines) == 5


def test_scatter_export_with_few_queries():
    text = scatter_export({"q1": 0.1, "q2": 0.3}, {"q1": 0.2, "q2": 0.4})
    assert f"r={NOT_AVAILABLE}" in text.splitlines()[0]


# ============================================================
# ERRORES, ENRUTAMIENTO Y ANOVA
# ============================================================

def test_render_error_table():
    rows = [
        ErrorTableRow(feature_set="All", learner="lr", measure="NDCG",
                      report=regression_errors([1, 2], [2, 4]), pearson=_result(0.3, p=0.001)),
        ErrorTableRow(feature_set="SOTA", learner="rf", measure="NDCG"),
    ]
    lines = render_error_table(rows, "markdown").splitlines()
    assert lines[0] == "| feature_set | learner | measure | r | tau | MAE | RMSE | MedAE | R2 |"
    assert lines[2] == f"| All | lr | NDCG | 0.300‡ | n/a | 1.500 | {math.sqrt(2.5):.3f} | 1.500 | -1.500 |"
    assert lines[3] == "| SOTA | rf | NDCG | n/a | n/a | n/a | n/a | n/a | n/a |"
    tsv = render_error_table(rows, "tsv").splitlines()
    assert tsv[1].split("\t")[5] == "1.5"


def test_render_routing_summary_marks_winners():
    e1 = {"q1": 0.2, "q2": 0.8}
    e2 = {"q1": 0.6, "q2": 0.4}
    oracle = oracle_route(e1, e2)
    winner = threshold_policy({"q1": 1.0, "q2": 0.0}, e1, e2, 0.5)
    loser = threshold_policy({"q1": 0.0, "q2": 1.0}, e1, e2, 0.5)
    lines = render_routing_summary(oracle, [winner, loser], "markdown").splitlines()
    assert lines[2] == "| R1 | 0.5000 | 0.0000 |  |"
    assert lines[4] == "| Oracle | 0.7000 | 0.5000 |  |"
    assert lines[5].endswith(f"| {BEATS_BOTH} |")
    assert lines[5].startswith("| threshold (T=0.5) |")
    assert BEATS_BOTH not in lines[6]


def test_render_paired_tests():
    e1 = {"q1": 0.2, "q2": 0.8, "q3": 0.5}
    e2 = {"q1": 0.6, "q2": 0.4, "q3": 0.1}
    policy = threshold_policy({"q1": 1.0, "q2": 0.0, "q3": 0.0}, e1, e2, 0.5)
    rows = compare_with_rankers([policy], e1, e2)
    tsv = render_paired_tests(rows, "tsv").splitlines()
    assert tsv[0] == "system\tbaseline\tt\tdf\tp\tp_bonferroni\tm"
    cells = tsv[1].split("\t")
    assert cells[:2] == ["threshold (T=0.5)", "R1"]
    assert cells[3] == "2"
    assert cells[-1] == "2"
    assert float(cells[5]) == pytest.approx(min(1.0, 2 * float(cells[4])))

    markdown = render_paired_tests([PairedComparison(system="pairwise", baseline="R2")], "markdown").splitlines()
    assert markdown[0] == "| system | baseline | t | df | p | p_bonferroni | m |"
    assert markdown[2] == "| pairwise | R2 | n/a | n/a | n/a | n/a | n/a |"


def _table8_report():
    a = math.sqrt(4.554 / 3040)
    d = math.sqrt(6.662 / 608)
    records = []
    for label, k in zip(("C1", "C2", "C3", "C4"), (-3, -1, 1, 3)):
        for i in range(152):
            value = k * a + (d if i % 2 == 0 else -d)
            records.append(CorrelationRecord(
                ranker=f"R{i % 19}", collection=label, predictor=f"P{i}",
                measure="NDCG", coefficient="pearson", result=_result(value),
            ))
    return CorrelationReport(records=records)


def test_anova_from_records_by_collection():
    table = anova_from_records(_table8_report(), "collection", coefficient="pearson", measure="NDCG")
    assert table.factor.source == "Collection"
    assert table.factor.df == 3
    assert table.residuals.df == 604
    assert table.f_value == pytest.approx(137.6, abs=0.5)
    text = render_anova([table], "markdown")
    assert "| Collection | 3 | 4.554 | 1.518 | 137.6 |" in text
    with pytest.raises(UsageError):
        anova_from_records(_table8_report(), "measure")
