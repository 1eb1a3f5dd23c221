# src/qpplab/services/corpus_io.py
"""
Lectura y validación de los formatos de texto del laboratorio.

Formatos soportados:
- Run TREC:      `qid Q0 docid rank score tag` (separador: espacios o tabs)
- Qrels TREC:    `qid 0 docid grade`
- Feature table: TSV con cabecera `qid<TAB>feat1<TAB>...`
- Eval table:    mismo formato que la feature table, fila final `MEAN`
- Term stats:    `qid<TAB>term<TAB>tcf`
- Corpus scores: `qid<TAB>s_corpus`
- LETOR sidecar: `qid<TAB>docid<TAB>feature<TAB>value`

Las líneas vacías y las que empiezan con `#` (cabeceras de salida) se ignoran.
Se aceptan finales de línea LF y CRLF.
"""

import logging
import math
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, TextIO, Tuple, Union

from pydantic import ValidationError

from qpplab.core.errors import (
    AlignmentError,
    ConfigurationError,
    DegenerateQueryError,
    DuplicateEntryError,
    MergeConflictError,
    MissingQueryError,
    ParseError,
    UsageError,
)
from qpplab.core.output import fmt_float
from qpplab.schemas.evaluation import EvalTable
from qpplab.schemas.features import FeatureTable, LetorScores, LetorSidecar, Provenance
from qpplab.schemas.retrieval import CorpusScoreTable, QrelsSet, QueryTermStats, RunSet, TermStat

logger = logging.getLogger(__name__)

Stream = Union[str, TextIO]

MEAN_ROW = "MEAN"


# ============================================================
# UTILIDADES DE LECTURA
# ============================================================

def read_text(path: str) -> str:
    """Lee un archivo completo; si no existe se considera error de uso."""
    file_path = Path(path)
    if not file_path.exists():
        raise UsageError(message=f"Archivo no encontrado: {path}", details={"path": path})
    with open(file_path, "r", encoding="utf-8", newline="") as f:
        return f.read()


def _iter_lines(stream: Stream) -> Iterator[Tuple[int, str]]:
    """Devuelve (número de línea, línea sin espacios extremos) omitiendo vacías y comentarios."""
    text = stream if isinstance(stream, str) else stream.read()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield line_no, line


def _split_tsv(line: str) -> List[str]:
    if "\t" in line:
        return [cell.strip() for cell in line.split("\t")]
    return line.split()


def _parse_float(text: str, source: str, line_no: int, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{what} no numérico: {text!r}", source, line_no)
    if not math.isfinite(value):
        raise ParseError(f"{what} no finito: {text!r}", source, line_no)
    return value


def _parse_int(text: str, source: str, line_no: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{what} no entero: {text!r}", source, line_no)


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


# ============================================================
# RUNS Y QRELS
# ============================================================

def parse_run(stream: Stream, source: str = "<run>") -> RunSet:
    """
    Lee un run TREC. El campo de rango sólo se valida como entero: el orden
    final es (score desc, doc_id asc) sin importar el orden del archivo.

    Raises:
        ParseError: línea con un número de campos distinto de 6 o valores no numéricos
        DuplicateEntryError: (qid, docid) repetido
    """
    per_query: Dict[str, Dict[str, float]] = {}
    run_tag: Optional[str] = None

    for line_no, line in _iter_lines(stream):
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(f"se esperaban 6 campos, hay {len(parts)}", source, line_no)
        qid, _ignored, doc_id, rank_text, score_text, tag = parts
        _parse_int(rank_text, source, line_no, "rango")
        score = _parse_float(score_text, source, line_no, "score")

        docs = per_query.setdefault(qid, {})
        if doc_id in docs:
            raise DuplicateEntryError(f"documento repetido ({qid}, {doc_id})", source, line_no)
        docs[doc_id] = score
        if run_tag is None:
            run_tag = tag

    run = RunSet.from_scores(run_tag or "", {qid: docs.items() for qid, docs in per_query.items()})
    logger.debug(f"Run '{run.run_tag}' leído de {source}: {len(run.entries)} consultas")
    return run


def write_run(run: RunSet) -> str:
    """Serializa un RunSet en formato TREC con scores sin pérdida."""
    lines = []
    for qid in run.query_ids():
        for doc in run.docs(qid):
            lines.append(f"{qid} Q0 {doc.doc_id} {doc.rank} {fmt_float(doc.score)} {run.run_tag}\n")
    return "".join(lines)


def parse_qrels(stream: Stream, source: str = "<qrels>") -> QrelsSet:
    """
    Lee qrels TREC. Los grados negativos (p. ej. -1) se llevan a 0 con una
    advertencia.
    """
    judgments: Dict[str, Dict[str, int]] = {}

    for line_no, line in _iter_lines(stream):
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"se esperaban 4 campos, hay {len(parts)}", source, line_no)
        qid, _ignored, doc_id, grade_text = parts
        grade = _parse_int(grade_text, source, line_no, "grado")
        if grade < 0:
            logger.warning(f"{source}:{line_no}: grado {grade} para ({qid}, {doc_id}) llevado a 0")
            grade = 0

        docs = judgments.setdefault(qid, {})
        if doc_id in docs:
            raise DuplicateEntryError(f"juicio repetido ({qid}, {doc_id})", source, line_no)
        docs[doc_id] = grade

    return QrelsSet(judgments=judgments)


# ============================================================
# TABLAS TSV (FEATURES Y EVALUACIÓN)
# ============================================================

def _parse_matrix(
    stream: Stream, source: str, skip_ids: Sequence[str] = ()
) -> Tuple[Tuple[str, ...], Dict[str, Tuple[float, ...]]]:
    lines = _iter_lines(stream)
    try:
        header_no, header_line = next(lines)
    except StopIteration:
        raise ParseError("falta la cabecera", source, None)

    header = _split_tsv(header_line)
    columns = tuple(header[1:])
    seen_columns = set()
    for name in columns:
        if name in seen_columns:
            raise DuplicateEntryError(f"columna repetida {name!r}", source, header_no)
        seen_columns.add(name)

    rows: Dict[str, Tuple[float, ...]] = {}
    for line_no, line in lines:
        cells = _split_tsv(line)
        if len(cells) != len(header):
            raise ParseError(
                f"fila irregular: {len(cells)} celdas, la cabecera tiene {len(header)}", source, line_no
            )
        qid = cells[0]
        if qid in skip_ids:
            continue
        if qid in rows:
            raise DuplicateEntryError(f"consulta repetida {qid!r}", source, line_no)
        rows[qid] = tuple(_parse_float(cell, source, line_no, "valor") for cell in cells[1:])

    return columns, rows


def parse_feature_table(stream: Stream, source: str = "<features>") -> FeatureTable:
    """Lee una tabla de predictores externa (p. ej. columnas B_bi / B_cross)."""
    columns, rows = _parse_matrix(stream, source)
    return FeatureTable(
        columns=columns,
        rows=rows,
        provenance={name: Provenance.ingested for name in columns},
    )


def feature_table_to_tsv(table: FeatureTable) -> str:
    lines = ["\t".join(("qid",) + table.columns) + "\n"]
    for qid in table.query_ids():
        lines.append("\t".join([qid] + [fmt_float(v) for v in table.rows[qid]]) + "\n")
    return "".join(lines)


def parse_eval_table(stream: Stream, source: str = "<evals>") -> EvalTable:
    """Relee una EvalTable exportada; la fila MEAN se descarta (se recalcula)."""
    columns, rows = _parse_matrix(stream, source, skip_ids=(MEAN_ROW,))
    try:
        return EvalTable(measures=columns, rows=rows)
    except ValidationError as e:
        raise ParseError(f"tabla de evaluación inválida: {e.errors()[0]['msg']}", source, None)


# ============================================================
# SIDECARS: TERM STATS, CORPUS SCORES, LETOR
# ============================================================

def parse_query_term_stats(stream: Stream, source: str = "<term-stats>") -> QueryTermStats:
    terms: Dict[str, List[TermStat]] = {}
    first = True

    for line_no, line in _iter_lines(stream):
        cells = _split_tsv(line)
        if len(cells) != 3:
            raise ParseError(f"se esperaban 3 campos, hay {len(cells)}", source, line_no)
        qid, term, tcf_text = cells
        if first and tcf_text.lower() == "tcf":
            first = False
            continue
        first = False
        tcf = _parse_int(tcf_text, source, line_no, "tcf")
        if tcf < 0:
            raise ParseError(f"tcf negativo ({tcf}) para ({qid}, {term})", source, line_no)

        query_terms = terms.setdefault(qid, [])
        if any(stat.term == term for stat in query_terms):
            raise DuplicateEntryError(f"término repetido ({qid}, {term})", source, line_no)
        query_terms.append(TermStat(term, tcf))

    return QueryTermStats(terms={qid: tuple(stats) for qid, stats in terms.items()})


def parse_corpus_scores(stream: Stream, source: str = "<corpus-scores>") -> CorpusScoreTable:
    scores: Dict[str, float] = {}
    first = True

    for line_no, line in _iter_lines(stream):
        cells = _split_tsv(line)
        if len(cells) != 2:
            raise ParseError(f"se esperaban 2 campos, hay {len(cells)}", source, line_no)
        qid, value_text = cells
        if first and not _is_number(value_text):
            first = False
            continue
        first = False
        if qid in scores:
            raise DuplicateEntryError(f"consulta repetida {qid!r}", source, line_no)
        scores[qid] = _parse_float(value_text, source, line_no, "score de corpus")

    return CorpusScoreTable(scores=scores)


def parse_letor_sidecar(stream: Stream, source: str = "<letor>") -> LetorSidecar:
    values: Dict[str, Dict[str, Dict[str, float]]] = {}
    order: List[str] = []
    first = True

    for line_no, line in _iter_lines(stream):
        cells = _split_tsv(line)
        if len(cells) != 4:
            raise ParseError(f"se esperaban 4 campos, hay {len(cells)}", source, line_no)
        qid, doc_id, feature, value_text = cells
        if first and not _is_number(value_text):
            first = False
            continue
        first = False
        value = _parse_float(value_text, source, line_no, "valor LETOR")

        if feature not in values:
            values[feature] = {}
            order.append(feature)
        docs = values[feature].setdefault(qid, {})
        if doc_id in docs:
            raise DuplicateEntryError(f"valor repetido ({qid}, {doc_id}, {feature})", source, line_no)
        docs[doc_id] = value

    return LetorSidecar(feature_order=tuple(order), values=values)


def letor_scores_for_run(
    sidecar: LetorSidecar,
    run: RunSet,
    k: int,
    features: Optional[Sequence[str]] = None,
) -> List[LetorScores]:
    """
    Alinea los valores LETOR con el top-k de cada consulta del run.

    Los documentos del run sin valor se toman como 0.0 (el modelo de matching
    da 0 si ningún término coincide) y se emite una advertencia. Las consultas
    sin ningún valor quedan fuera de `values`.
    """
    names = list(sidecar.feature_order) if features is None else list(features)
    result: List[LetorScores] = []

    for name in names:
        if name not in sidecar.values:
            raise ConfigurationError(
                f"Feature LETOR '{name}' no está en el sidecar",
                {"feature": name, "available": list(sidecar.feature_order)},
            )
        per_query = sidecar.values[name]
        aligned: Dict[str, Tuple[float, ...]] = {}
        for qid in run.query_ids():
            if qid not in per_query:
                continue
            doc_values = per_query[qid]
            top = run.ranking(qid)[:k]
            missing = [doc for doc in top if doc not in doc_values]
            if missing:
                logger.warning(
                    f"{name}: {len(missing)} documentos de la consulta {qid} sin valor LETOR, se usa 0.0"
                )
            aligned[qid] = tuple(doc_values.get(doc, 0.0) for doc in top)
        result.append(LetorScores(feature_name=name, values=aligned))

    return result


def effective_term_count(stats: QueryTermStats, qid: str) -> int:
    """
    N_q: número de términos de la consulta con tcf > 0.

    Raises:
        MissingQueryError: la consulta no está en las estadísticas
        DegenerateQueryError: ningún término tiene tcf > 0
    """
    if qid not in stats.terms:
        raise MissingQueryError(qid, "las estadísticas de términos")
    count = sum(1 for stat in stats.terms[qid] if stat.tcf > 0)
    if count == 0:
        raise DegenerateQueryError(qid)
    return count


# ============================================================
# ALINEACIÓN DE CONSULTAS
# ============================================================

def align_query_sets(named_sets: Sequence[Tuple[str, Iterable[str]]]) -> List[str]:
    """
    Intersección ordenada de los conjuntos de consultas. Emite una
    advertencia por cada consulta descartada indicando en qué entradas falta.
    """
    sets = [(label, set(ids)) for label, ids in named_sets]
    if not sets:
        raise AlignmentError("No hay entradas para alinear")

    union = set().union(*(ids for _, ids in sets))
    common = set.intersection(*(ids for _, ids in sets))

    for qid in sorted(union - common):
        missing_from = [label for label, ids in sets if qid not in ids]
        logger.warning(f"Consulta {qid} descartada: falta en {', '.join(missing_from)}")

    if not common:
        raise AlignmentError(
            "La intersección de consultas está vacía",
            {"inputs": [label for label, _ in sets]},
        )
    return sorted(common)


def _label_extra(item, index: int) -> Tuple[str, Iterable[str]]:
    if isinstance(item, tuple):
        label, obj = item
        return label, obj.query_ids()
    return f"{type(item).__name__}[{index}]", item.query_ids()


def align_queries(run: RunSet, qrels: QrelsSet, extra: Optional[Sequence] = None) -> List[str]:
    """Consultas presentes en el run, los qrels y cada entrada extra (tabla o sidecar)."""
    named = [("run", run.query_ids()), ("qrels", qrels.query_ids())]
    for index, item in enumerate(extra or []):
        named.append(_label_extra(item, index))
    return align_query_sets(named)


def merge_feature_tables(tables: Sequence[FeatureTable], labels: Optional[Sequence[str]] = None) -> FeatureTable:
    """
    Fusiona tablas columna a columna por consulta (intersección con advertencias).

    Raises:
        MergeConflictError: el mismo nombre de columna aparece en dos tablas
    """
    if not tables:
        raise AlignmentError("No hay tablas para fusionar")
    labels = list(labels) if labels is not None else [f"tabla[{i}]" for i in range(len(tables))]

    columns: List[str] = []
    provenance: Dict[str, Provenance] = {}
    for label, table in zip(labels, tables):
        for name in table.columns:
            if name in provenance:
                raise MergeConflictError(
                    f"Columna duplicada al fusionar: {name!r} (en {label})",
                    {"column": name, "table": label},
                )
            columns.append(name)
            provenance[name] = table.provenance[name]

    qids = align_query_sets([(label, table.query_ids()) for label, table in zip(labels, tables)])
    rows = {qid: tuple(v for table in tables for v in table.rows[qid]) for qid in qids}
    return FeatureTable(columns=tuple(columns), rows=rows, provenance=provenance)


# ============================================================
# CARGA DESDE ARCHIVO
# ============================================================

def load_run(path: str) -> RunSet:
    return parse_run(read_text(path), source=path)


def load_qrels(path: str) -> QrelsSet:
    return parse_qrels(read_text(path), source=path)


def load_feature_table(path: str) -> FeatureTable:
    return parse_feature_table(read_text(path), source=path)


def load_eval_table(path: str) -> EvalTable:
    return parse_eval_table(read_text(path), source=path)


def load_term_stats(path: str) -> QueryTermStats:
    return parse_query_term_stats(read_text(path), source=path)


def load_corpus_scores(path: str) -> CorpusScoreTable:
    return parse_corpus_scores(read_text(path), source=path)


def load_letor_sidecar(path: str) -> LetorSidecar:
    return parse_letor_sidecar(read_text(path), source=path)
