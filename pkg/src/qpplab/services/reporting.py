# src/qpplab/services/reporting.py
"""
Armado de reportes: tablas de correlación con marcadores de significancia,
matrices de correlación, datos de boxplot, exportación de dispersión,
tablas de error, resumen de enrutamiento y tabla ANOVA.

Cada reporte tiene una versión TSV sin pérdida (floats con repr) y una
versión markdown con `report_decimals` decimales.
"""

import logging
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from qpplab.core.config import settings
from qpplab.core.errors import ParseError, QPPLabError, SampleSizeError, UsageError
from qpplab.core.output import fmt_float
from qpplab.core.parallel import parallel_map
from qpplab.schemas.evaluation import EvalTable
from qpplab.schemas.features import FeatureTable
from qpplab.schemas.reports import (
    BoxplotGroup,
    CorrelationMatrix,
    CorrelationRecord,
    CorrelationReport,
    ErrorTableRow,
    FiveNumberSummary,
)
from qpplab.schemas.routing import PairedComparison, RouteResult
from qpplab.schemas.stats import AnovaTable, CorrelationResult, Marker
from qpplab.services.corpus_io import Stream, align_query_sets
from qpplab.services.qpp_letor import summarize
from qpplab.services.statlab import COEFFICIENTS, PEARSON, anova_one_way, correlate

logger = logging.getLogger(__name__)

NOT_AVAILABLE = "n/a"
BEATS_BOTH = "▲"
FORMATS = ("tsv", "markdown")

RECORD_COLUMNS = ("ranker", "collection", "predictor", "measure", "coefficient", "value", "p", "n", "marker")
GROUP_FACTORS = ("ranker", "collection")


# ============================================================
# UTILIDADES DE FORMATO
# ============================================================

def _check_format(fmt: str) -> None:
    if fmt not in FORMATS:
        raise UsageError(f"Formato desconocido: {fmt}", {"format": fmt, "allowed": list(FORMATS)})


def fixed(value: float, decimals: Optional[int] = None) -> str:
    decimals = settings.report_decimals if decimals is None else decimals
    return f"{value:.{decimals}f}"


def format_cell(result: Optional[CorrelationResult], decimals: Optional[int] = None) -> str:
    """Valor con 3 decimales y marcador (‡ p<0.01, † p<0.05); n/a si no está definido."""
    if result is None:
        return NOT_AVAILABLE
    return f"{fixed(result.coefficient, decimals)}{result.marker.symbol}"


def markdown_table(headers: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(headers) + " |", "|" + "|".join("---" for _ in headers) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def tsv_table(headers: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    lines = ["\t".join(headers)]
    lines.extend("\t".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def _render(headers: Sequence[str], rows: Iterable[Sequence[str]], fmt: str) -> str:
    _check_format(fmt)
    return markdown_table(headers, rows) if fmt == "markdown" else tsv_table(headers, rows)


def _safe_correlate(x, y, coefficient: str, label: str) -> Optional[CorrelationResult]:
    try:
        return correlate(x, y, coefficient)
    except QPPLabError as e:
        logger.warning(f"Celda {label} ({coefficient}) no definida: {e.message}")
        return None


# ============================================================
# TABLAS DE CORRELACIÓN
# ============================================================

def correlation_table(
    features: FeatureTable,
    evals: EvalTable,
    coefficient: Union[str, Sequence[str]] = PEARSON,
    ranker: str = "-",
    collection: str = "-",
    threads: int = 1,
) -> CorrelationReport:
    """
    Una celda por (predictor, medida, coeficiente) sobre las consultas comunes.
    Las celdas no definidas (columna constante) quedan como n/a con advertencia.
    """
    coefficients = [coefficient] if isinstance(coefficient, str) else list(coefficient)
    for name in coefficients:
        if name not in COEFFICIENTS:
            raise UsageError(f"Coeficiente desconocido: {name}", {"allowed": list(COEFFICIENTS)})

    qids = align_query_sets([("features", features.query_ids()), ("evaluación", evals.query_ids())])
    if len(qids) < 3:
        raise SampleSizeError(f"Se requieren al menos 3 consultas alineadas, hay {len(qids)}", {"n": len(qids)})

    cells = [
        (predictor, measure, name)
        for measure in evals.measures
        for name in coefficients
        for predictor in features.columns
    ]

    def compute(cell: Tuple[str, str, str]) -> CorrelationRecord:
        predictor, measure, name = cell
        result = _safe_correlate(
            features.column(predictor, qids), evals.column(measure, qids), name, f"{predictor}/{measure}"
        )
        return CorrelationRecord(
            ranker=ranker, collection=collection, predictor=predictor,
            measure=measure, coefficient=name, result=result,
        )

    return CorrelationReport(records=parallel_map(compute, cells, threads))


def merge_reports(reports: Sequence[CorrelationReport]) -> CorrelationReport:
    return CorrelationReport(records=[record for report in reports for record in report.records])


def _group_label(group: Tuple[str, str, str, str]) -> str:
    ranker, collection, measure, coefficient = group
    symbol = "r" if coefficient == PEARSON else "τ"
    parts = [p for p in (ranker, collection) if p != "-"]
    return " ".join(parts + [f"{measure} {symbol}"])


def render_correlation_table(report: CorrelationReport, fmt: str = "markdown") -> str:
    """
    Markdown: filas = predictores, columnas = (ranker, colección, medida,
    coeficiente). TSV: registros en formato largo, sin pérdida.
    """
    _check_format(fmt)
    if fmt == "tsv":
        return records_to_tsv(report)
    groups = report.column_groups()
    headers = ["Predictor"] + [_group_label(g) for g in groups]
    rows = []
    for predictor in report.rows():
        row = [predictor]
        for group in groups:
            record = report.cell(predictor, group)
            row.append(format_cell(record.result) if record is not None else "")
        rows.append(row)
    return markdown_table(headers, rows)


def records_to_tsv(report: CorrelationReport) -> str:
    rows = []
    for r in report.records:
        if r.result is None:
            tail = [NOT_AVAILABLE, NOT_AVAILABLE, NOT_AVAILABLE, Marker.none.value]
        else:
            tail = [fmt_float(r.result.coefficient), fmt_float(r.result.p_value), str(r.result.n), r.result.marker.value]
        rows.append([r.ranker, r.collection, r.predictor, r.measure, r.coefficient] + tail)
    return tsv_table(RECORD_COLUMNS, rows)


def parse_records(stream: Stream, source: str = "<records>") -> CorrelationReport:
    """Relee registros de correlación en formato largo (el gemelo TSV de las tablas)."""
    text = stream if isinstance(stream, str) else stream.read()
    records: List[CorrelationRecord] = []
    header_seen = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split("\t")]
        if not header_seen:
            header_seen = True
            if tuple(cells) != RECORD_COLUMNS:
                raise ParseError(f"cabecera de registros inválida: {cells}", source, line_no)
            continue
        if len(cells) != len(RECORD_COLUMNS):
            raise ParseError(f"se esperaban {len(RECORD_COLUMNS)} campos, hay {len(cells)}", source, line_no)
        ranker, collection, predictor, measure, coefficient, value, p, n, marker = cells

        result = None
        if value != NOT_AVAILABLE:
            try:
                result = CorrelationResult(
                    coefficient=float(value), p_value=float(p), n=int(n),
                    marker=Marker(marker), method=coefficient,
                )
            except (ValueError, ValidationError) as e:
                raise ParseError(f"registro inválido: {e}", source, line_no)
        records.append(CorrelationRecord(
            ranker=ranker, collection=collection, predictor=predictor,
            measure=measure, coefficient=coefficient, result=result,
        ))
    return CorrelationReport(records=records)


def correlation_matrix(
    features: FeatureTable,
    evals: Optional[EvalTable] = None,
    coefficient: str = PEARSON,
    threads: int = 1,
) -> CorrelationMatrix:
    """Matriz simétrica sobre las columnas de features y medidas (diagonal 1)."""
    named: Dict[str, Mapping[str, float]] = {name: features.as_dict(name) for name in features.columns}
    sets = [("features", features.query_ids())]
    if evals is not None:
        for measure in evals.measures:
            named[measure] = evals.as_dict(measure)
        sets.append(("evaluación", evals.query_ids()))
    names = list(named)
    if len(names) < 2:
        raise SampleSizeError("La matriz de correlación requiere al menos 2 columnas", {"columns": len(names)})
    qids = align_query_sets(sets)
    vectors = {name: [named[name][q] for q in qids] for name in names}

    pairs = [(i, j) for i in range(len(names)) for j in range(i, len(names))]

    def compute(pair: Tuple[int, int]) -> Optional[CorrelationResult]:
        i, j = pair
        if i == j:
            result = _safe_correlate(vectors[names[i]], vectors[names[i]], coefficient, names[i])
            if result is None:
                return None
            return CorrelationResult(coefficient=1.0, p_value=0.0, n=len(qids), marker=Marker.ddagger, method=coefficient)
        return _safe_correlate(vectors[names[i]], vectors[names[j]], coefficient, f"{names[i]}/{names[j]}")

    results = parallel_map(compute, pairs, threads)
    cells: List[List[Optional[CorrelationResult]]] = [[None] * len(names) for _ in names]
    for (i, j), result in zip(pairs, results):
        cells[i][j] = result
        cells[j][i] = result
    return CorrelationMatrix(names=names, cells=cells)


def render_matrix(matrix: CorrelationMatrix, fmt: str = "tsv") -> str:
    _check_format(fmt)
    if fmt == "markdown":
        rows = [[name] + [format_cell(c) for c in row] for name, row in zip(matrix.names, matrix.cells)]
        return markdown_table([""] + matrix.names, rows)
    rows = [
        [name] + [NOT_AVAILABLE if c is None else fmt_float(c.coefficient) for c in row]
        for name, row in zip(matrix.names, matrix.cells)
    ]
    return tsv_table(["column"] + matrix.names, rows)


# ============================================================
# BOXPLOTS Y DISPERSIÓN
# ============================================================

def five_numbers(values: Sequence[float]) -> FiveNumberSummary:
    return FiveNumberSummary(
        minimum=summarize(values, "Min"),
        q1=summarize(values, "Q1"),
        median=summarize(values, "Median"),
        q3=summarize(values, "Q3"),
        maximum=summarize(values, "Max"),
    )


def boxplot_data(correlations: Sequence[Tuple[str, str, float]], group_by: str = "ranker") -> List[BoxplotGroup]:
    """
    Agrupa (ranker, colección, valor) por ranker o colección; los grupos salen
    ordenados por mediana descendente (empates en orden de aparición).
    """
    if group_by not in GROUP_FACTORS:
        raise UsageError(f"Agrupación desconocida: {group_by}", {"allowed": list(GROUP_FACTORS)})
    if not correlations:
        raise SampleSizeError("No hay correlaciones para agrupar")
    index = 0 if group_by == "ranker" else 1

    grouped: Dict[str, List[float]] = {}
    for item in correlations:
        grouped.setdefault(item[index], []).append(float(item[2]))

    groups = [BoxplotGroup(label=label, values=values, summary=five_numbers(values)) for label, values in grouped.items()]
    return sorted(groups, key=lambda g: -g.summary.median)


def correlations_from_records(report: CorrelationReport, coefficient: Optional[str] = None,
                              measure: Optional[str] = None) -> List[Tuple[str, str, float]]:
    """(ranker, colección, valor) de los registros definidos que pasan el filtro."""
    return [
        (r.ranker, r.collection, r.result.coefficient)
        for r in report.records
        if r.result is not None
        and (coefficient is None or r.coefficient == coefficient)
        and (measure is None or r.measure == measure)
    ]


def render_boxplots(groups: Sequence[BoxplotGroup], fmt: str = "tsv") -> str:
    headers = ["group", "n", "min", "q1", "median", "q3", "max"]
    num = fmt_float if fmt == "tsv" else fixed
    rows = [
        [g.label, str(len(g.values))] + [num(v) for v in (
            g.summary.minimum, g.summary.q1, g.summary.median, g.summary.q3, g.summary.maximum)]
        for g in groups
    ]
    return _render(headers, rows, fmt)


def scatter_export(predicted: Mapping[str, float], actual: Mapping[str, float],
                   predicted_name: str = "predicted", actual_name: str = "actual") -> str:
    """TSV de dos columnas (predicho, real) con una línea de comentario con r y p."""
    qids = align_query_sets([(predicted_name, predicted.keys()), (actual_name, actual.keys())])
    x = [predicted[q] for q in qids]
    y = [actual[q] for q in qids]
    result = _safe_correlate(x, y, PEARSON, f"{predicted_name}/{actual_name}") if len(qids) >= 3 else None
    if result is None:
        stats = f"r={NOT_AVAILABLE} p={NOT_AVAILABLE}"
    else:
        stats = f"r={fixed(result.coefficient, 3)} p={result.p_value:.3g}"
    lines = [f"# {predicted_name} vs {actual_name}: {stats} n={len(qids)}\n"]
    lines.extend(f"{fmt_float(a)}\t{fmt_float(b)}\n" for a, b in zip(x, y))
    return "".join(lines)


# ============================================================
# ERRORES, ENRUTAMIENTO Y ANOVA
# ============================================================

def render_error_table(rows: Sequence[ErrorTableRow], fmt: str = "markdown") -> str:
    headers = ["feature_set", "learner", "measure", "r", "tau", "MAE", "RMSE", "MedAE", "R2"]
    num = fmt_float if fmt == "tsv" else fixed

    def cell(result: Optional[CorrelationResult]) -> str:
        if result is None:
            return NOT_AVAILABLE
        return fmt_float(result.coefficient) if fmt == "tsv" else format_cell(result)

    out = []
    for row in rows:
        report = row.report
        errors = [NOT_AVAILABLE] * 4 if report is None else [
            num(report.mae), num(report.rmse), num(report.medae),
            NOT_AVAILABLE if report.r_squared is None else num(report.r_squared),
        ]
        out.append([row.feature_set, row.learner, row.measure, cell(row.pearson), cell(row.kendall)] + errors)
    return _render(headers, out, fmt)


def render_routing_summary(oracle: RouteResult, policies: Sequence[RouteResult], fmt: str = "markdown") -> str:
    """Filas R1, R2 y Oracle, luego una por política con ▲ si supera a ambos rankers."""
    num = fmt_float if fmt == "tsv" else lambda v: fixed(v, 4)
    headers = ["system", "mean", "fraction_R2", "beats_both"]
    rows = [
        ["R1", num(oracle.mean_r1), num(0.0), ""],
        ["R2", num(oracle.mean_r2), num(1.0), ""],
        ["Oracle", num(oracle.mean_meta), num(oracle.fraction_r2), ""],
    ]
    for result in policies:
        rows.append([result.label, num(result.mean_meta), num(result.fraction_r2), BEATS_BOTH if result.beats_both else ""])
    return _render(headers, rows, fmt)


def render_paired_tests(comparisons: Sequence[PairedComparison], fmt: str = "markdown") -> str:
    """Una fila por (política, ranker base); el p ajustado lleva el marcador en markdown."""
    headers = ["system", "baseline", "t", "df", "p", "p_bonferroni", "m"]
    rows = []
    for item in comparisons:
        test = item.result
        if test is None:
            rows.append([item.system, item.baseline] + [NOT_AVAILABLE] * 5)
            continue
        if fmt == "tsv":
            cells = [fmt_float(test.t_statistic), str(test.df), fmt_float(test.p_value), fmt_float(test.p_adjusted)]
        else:
            cells = [fixed(test.t_statistic), str(test.df), f"{test.p_value:.3g}",
                     f"{test.p_adjusted:.3g}{test.marker.symbol}"]
        rows.append([item.system, item.baseline] + cells + [str(test.m_comparisons)])
    return _render(headers, rows, fmt)


def render_anova(tables: Sequence[AnovaTable], fmt: str = "markdown") -> str:
    headers = ["Source", "Df", "Sum Sq", "Mean Sq", "F value", "Pr(>F)"]
    num = fmt_float if fmt == "tsv" else fixed
    rows = []
    for table in tables:
        p_text = fmt_float(table.p_value) if fmt == "tsv" else f"{table.p_value:.3g}"
        rows.append([table.factor.source, str(table.factor.df), num(table.factor.sum_sq),
                     num(table.factor.mean_sq), num(table.f_value) if fmt == "tsv" else f"{table.f_value:.1f}", p_text])
        rows.append([table.residuals.source, str(table.residuals.df), num(table.residuals.sum_sq),
                     num(table.residuals.mean_sq), "", ""])
    return _render(headers, rows, fmt)


def anova_from_records(report: CorrelationReport, factor: str, coefficient: Optional[str] = None,
                       measure: Optional[str] = None) -> AnovaTable:
    """ANOVA de un factor (ranker o colección) sobre los valores de correlación."""
    values = correlations_from_records(report, coefficient, measure)
    if factor not in GROUP_FACTORS:
        raise UsageError(f"Factor desconocido: {factor}", {"allowed": list(GROUP_FACTORS)})
    index = 0 if factor == "ranker" else 1
    groups: Dict[str, List[float]] = {}
    for item in values:
        groups.setdefault(item[index], []).append(item[2])
    return anova_one_way(groups, factor=factor.capitalize())
