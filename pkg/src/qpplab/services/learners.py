# src/qpplab/services/learners.py
"""
Modelos que combinan predictores (regresión lineal y random forest) y el
protocolo de validación cruzada en dos mitades.

Toda la aleatoriedad sale de numpy.random.default_rng(seed), que usa el
generador PCG64 documentado por numpy. El árbol t del bosque usa la semilla
`seed + t`, así el ajuste no depende del número de hilos.
"""

import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError
from scipy import linalg

from qpplab.core.errors import (
    ConfigurationError,
    DimensionMismatchError,
    QPPLabError,
    SampleSizeError,
    UnderdeterminedError,
)
from qpplab.core.parallel import parallel_map
from qpplab.schemas.features import FeatureTable
from qpplab.schemas.models import (
    MODEL_FORMAT_VERSION,
    CrossFitted,
    CrossFittedDump,
    CrossValidationResult,
    CvSplit,
    FoldCorrelation,
    ForestModel,
    ForestParams,
    LearnerSpec,
    LinearModel,
    Model,
    TreeArrays,
)
from qpplab.schemas.stats import CorrelationResult
from qpplab.services.corpus_io import align_query_sets
from qpplab.services.statlab import KENDALL, PEARSON, correlate, significance_marker

logger = logging.getLogger(__name__)

RIDGE_FACTOR = 1e-8
LEAF = -1

SOTA_COLUMNS = ("UQC", "NQC", "WIG", "QF")
LETOR_PREFIX = "L."

FOLD_AVERAGE = "fold_average"
POOLED = "pooled"
MIN_FOLD_CORRELATION = 3


def _as_matrix(X) -> np.ndarray:
    matrix = np.asarray(X, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1) if matrix.size else matrix.reshape(0, 0)
    return matrix


# ============================================================
# REGRESIÓN LINEAL
# ============================================================

def fit_ols(X, y, feature_names: Optional[Sequence[str]] = None) -> LinearModel:
    """
    Mínimos cuadrados con intercepto por ecuaciones normales (Cholesky sobre
    los datos centrados). Si la matriz es deficiente en rango se añade
    lambda = 1e-8 * traza a la diagonal.

    Raises:
        UnderdeterminedError: menos filas que columnas + 1
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n != y.size:
        raise DimensionMismatchError(f"X tiene {n} filas e y {y.size} valores", {"rows": n, "targets": int(y.size)})
    if n < p + 1:
        raise UnderdeterminedError(
            f"Sistema indeterminado: {n} filas para {p} features + intercepto", {"rows": n, "cols": p}
        )
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{i}" for i in range(p))

    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    if p == 0:
        return LinearModel(feature_names=names, coefficients=(), intercept=y_mean)

    Xc = X - x_mean
    yc = y - y_mean
    gram = Xc.T @ Xc
    rhs = Xc.T @ yc

    beta = None
    if np.linalg.matrix_rank(Xc) == p:
        try:
            beta = linalg.cho_solve(linalg.cho_factor(gram), rhs)
        except linalg.LinAlgError:
            beta = None
    if beta is None:
        trace = float(np.trace(gram))
        lam = RIDGE_FACTOR * trace if trace > 0 else RIDGE_FACTOR
        logger.warning(f"Matriz de diseño deficiente en rango: se aplica ridge con lambda={lam:.3g}")
        beta = linalg.cho_solve(linalg.cho_factor(gram + lam * np.eye(p)), rhs)

    intercept = y_mean - float(x_mean @ beta)
    return LinearModel(
        feature_names=names,
        coefficients=tuple(float(b) for b in beta),
        intercept=intercept,
    )


# ============================================================
# RANDOM FOREST
# ============================================================

def _best_split(Xn: np.ndarray, yn: np.ndarray, candidates: np.ndarray,
                min_leaf: int) -> Optional[Tuple[int, float]]:
    """Mejor corte por reducción de SSE (sumas acumuladas); None si ninguno mejora."""
    n = yn.size
    positions = np.arange(min_leaf - 1, n - min_leaf)
    if positions.size == 0:
        return None

    best_gain = 0.0
    best: Optional[Tuple[int, float]] = None
    for feature in candidates:
        order = np.argsort(Xn[:, feature], kind="mergesort")
        xs = Xn[order, feature]
        ys = yn[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)

        parent_sse = csq[-1] - csum[-1] ** 2 / n
        left_n = positions + 1
        right_n = n - left_n
        left_sse = csq[positions] - csum[positions] ** 2 / left_n
        right_sse = (csq[-1] - csq[positions]) - (csum[-1] - csum[positions]) ** 2 / right_n
        gains = parent_sse - (left_sse + right_sse)
        gains[xs[positions] == xs[positions + 1]] = -np.inf

        i = int(np.argmax(gains))
        if gains[i] > best_gain:
            lo, hi = xs[positions[i]], xs[positions[i] + 1]
            threshold = (lo + hi) / 2.0
            if threshold >= hi:
                threshold = lo
            best_gain = float(gains[i])
            best = (int(feature), float(threshold))
    return best


def _fit_tree(X: np.ndarray, y: np.ndarray, params: ForestParams, rng: np.random.Generator) -> TreeArrays:
    n, p = X.shape
    n_candidates = max(1, math.ceil(math.sqrt(p)))
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def new_node(indices: np.ndarray) -> int:
        targets = y[indices]
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(targets[0]) if np.all(targets == targets[0]) else float(targets.mean()))
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, indices, depth = stack.pop()
        yn = y[indices]
        if depth >= params.max_depth or indices.size < 2 * params.min_leaf or np.all(yn == yn[0]):
            continue
        candidates = rng.choice(p, size=n_candidates, replace=False)
        split = _best_split(X[indices], yn, candidates, params.min_leaf)
        if split is None:
            continue

        split_feature, split_threshold = split
        goes_left = X[indices, split_feature] <= split_threshold
        left_id = new_node(indices[goes_left])
        right_id = new_node(indices[~goes_left])
        feature[node] = split_feature
        threshold[node] = split_threshold
        left[node] = left_id
        right[node] = right_id
        stack.append((right_id, indices[~goes_left], depth + 1))
        stack.append((left_id, indices[goes_left], depth + 1))

    return TreeArrays(
        feature=tuple(feature),
        threshold=tuple(threshold),
        left=tuple(left),
        right=tuple(right),
        value=tuple(value),
    )


def _predict_tree(tree: TreeArrays, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0], dtype=np.float64)
    for row in range(X.shape[0]):
        node = 0
        while tree.feature[node] != LEAF:
            if X[row, tree.feature[node]] <= tree.threshold[node]:
                node = tree.left[node]
            else:
                node = tree.right[node]
        out[row] = tree.value[node]
    return out


def fit_rf(X, y, params: ForestParams = ForestParams(), seed: int = 0,
           feature_names: Optional[Sequence[str]] = None, threads: int = 1) -> ForestModel:
    """
    Bosque de árboles de regresión sobre muestras bootstrap; en cada nodo se
    evalúan ceil(sqrt(p)) features elegidas al azar.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n != y.size:
        raise DimensionMismatchError(f"X tiene {n} filas e y {y.size} valores", {"rows": n, "targets": int(y.size)})
    if n < 2:
        raise SampleSizeError("Random forest requiere al menos 2 filas", {"rows": n})
    if p == 0:
        raise DimensionMismatchError("Random forest requiere al menos una feature")
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{i}" for i in range(p))

    def fit_one(tree_index: int) -> TreeArrays:
        rng = np.random.default_rng(seed + tree_index)
        sample = rng.integers(0, n, size=n)
        return _fit_tree(X[sample], y[sample], params, rng)

    trees = parallel_map(fit_one, range(params.n_trees), threads)
    logger.debug(f"Random forest ajustado: {params.n_trees} árboles, {n} filas, {p} features")
    return ForestModel(feature_names=names, trees=tuple(trees), params=params, seed=seed)


# ============================================================
# PREDICCIÓN Y AJUSTE GENÉRICO
# ============================================================

def predict(model: Model, X) -> np.ndarray:
    X = _as_matrix(X)
    if X.shape[0] == 0:
        return np.empty(0, dtype=np.float64)
    width = len(model.feature_names)
    if X.shape[1] != width:
        raise DimensionMismatchError(
            f"El modelo espera {width} features, se recibieron {X.shape[1]}",
            {"expected": width, "received": int(X.shape[1])},
        )
    if isinstance(model, LinearModel):
        return X @ np.asarray(model.coefficients, dtype=np.float64) + model.intercept
    per_tree = np.stack([_predict_tree(tree, X) for tree in model.trees])
    return per_tree.mean(axis=0)


def fit_model(X, y, learner: LearnerSpec, seed: int = 0,
              feature_names: Optional[Sequence[str]] = None) -> Model:
    if learner.kind == "lr":
        return fit_ols(X, y, feature_names)
    return fit_rf(X, y, learner.forest, seed, feature_names, learner.threads)


def resolve_feature_set(spec: str, table: FeatureTable) -> Tuple[str, List[str]]:
    """
    Traduce un conjunto de features a (nombre, columnas).

    Admite `SOTA`, `LETOR`, `All`, una columna suelta o `NOMBRE=col1,col2`.
    """
    if "=" in spec:
        name, raw = spec.split("=", 1)
        columns = [c.strip() for c in raw.split(",") if c.strip()]
    elif spec == "SOTA":
        name, columns = spec, [c for c in table.columns if c in SOTA_COLUMNS]
    elif spec == "LETOR":
        name, columns = spec, [c for c in table.columns if c.startswith(LETOR_PREFIX)]
    elif spec == "All":
        name, columns = spec, list(table.columns)
    else:
        name, columns = spec, [spec]

    missing = [c for c in columns if c not in table.columns]
    if missing or not columns:
        raise ConfigurationError(
            f"Conjunto de features '{spec}' inválido",
            {"missing": missing, "available": list(table.columns)},
        )
    return name.strip(), columns


# ============================================================
# VALIDACIÓN CRUZADA EN DOS MITADES
# ============================================================

def two_fold_split(qids: Sequence[str], seed: int = 0) -> CvSplit:
    """Baraja con PCG64(seed); la primera mitad (piso) va a fold_a."""
    qids = list(qids)
    if len(qids) < 2:
        raise SampleSizeError("La validación cruzada requiere al menos 2 consultas", {"n": len(qids)})
    order = np.random.default_rng(seed).permutation(len(qids))
    shuffled = [qids[i] for i in order]
    half = len(qids) // 2
    return CvSplit(fold_a=tuple(sorted(shuffled[:half])), fold_b=tuple(sorted(shuffled[half:])))


def fit_cross(features: FeatureTable, target: Mapping[str, float], learner: LearnerSpec,
              split: CvSplit, columns: Optional[Sequence[str]] = None, seed: int = 0) -> CrossFitted:
    """Entrena un modelo por fold: model_a con fold_a (predice fold_b) y model_b al revés."""
    columns = list(features.columns) if columns is None else list(columns)

    def train(qids: Sequence[str]) -> Model:
        X = features.matrix(columns, qids)
        y = np.array([target[q] for q in qids], dtype=np.float64)
        return fit_model(X, y, learner, seed, columns)

    return CrossFitted(
        split=split,
        model_a=train(split.fold_a),
        model_b=train(split.fold_b),
        columns=tuple(columns),
    )


def out_of_fold_predictions(cross: CrossFitted, features: FeatureTable) -> Dict[str, float]:
    predictions: Dict[str, float] = {}
    for model, test_ids in ((cross.model_a, cross.split.fold_b), (cross.model_b, cross.split.fold_a)):
        values = predict(model, features.matrix(cross.columns, test_ids))
        predictions.update({qid: float(v) for qid, v in zip(test_ids, values)})
    return dict(sorted(predictions.items()))


def _safe_correlate(x: Sequence[float], y: Sequence[float], coefficient: str, label: str) -> Optional[CorrelationResult]:
    try:
        return correlate(x, y, coefficient)
    except QPPLabError as e:
        logger.warning(f"Correlación {coefficient} no definida en {label}: {e.message}")
        return None


def _average(results: Sequence[Optional[CorrelationResult]], n: int) -> Optional[CorrelationResult]:
    """Media de los coeficientes de los folds; p conservador (el mayor)."""
    if any(r is None for r in results):
        return None
    coefficient = sum(r.coefficient for r in results) / len(results)
    p_value = max(r.p_value for r in results)
    return CorrelationResult(
        coefficient=coefficient,
        p_value=p_value,
        n=n,
        marker=significance_marker(p_value),
        method=results[0].method,
    )


def cross_validate(features: FeatureTable, target: Mapping[str, float], learner: LearnerSpec,
                   seed: int = 0, columns: Optional[Sequence[str]] = None,
                   mode: str = FOLD_AVERAGE) -> CrossValidationResult:
    """
    Entrena en un fold, predice el otro y viceversa. Devuelve las
    predicciones fuera de fold de todas las consultas, las correlaciones por
    fold de test y la correlación resumida según `mode`:

    - fold_average: media de los coeficientes de los dos folds de test
    - pooled: una sola correlación sobre todas las predicciones fuera de fold
    """
    if mode not in (FOLD_AVERAGE, POOLED):
        raise ConfigurationError(f"Modo de validación cruzada desconocido: {mode}")
    qids = align_query_sets([("features", features.query_ids()), ("objetivo", target.keys())])
    if len(qids) < 4:
        raise SampleSizeError("La validación cruzada requiere al menos 4 consultas", {"n": len(qids)})

    table = features.restrict(qids)
    split = two_fold_split(qids, seed)
    cross = fit_cross(table, target, learner, split, columns, seed)
    predictions = out_of_fold_predictions(cross, table)

    small_folds = min(len(split.fold_a), len(split.fold_b)) < MIN_FOLD_CORRELATION
    if small_folds:
        logger.warning(
            f"Folds de {len(split.fold_a)} y {len(split.fold_b)} consultas: las correlaciones por fold "
            f"requieren n >= {2 * MIN_FOLD_CORRELATION} consultas; use el modo '{POOLED}'"
        )

    folds: List[FoldCorrelation] = []
    for fold_name, test_ids in (("A", split.fold_a), ("B", split.fold_b)):
        if small_folds:
            folds.append(FoldCorrelation(fold=fold_name, pearson=None, kendall=None))
            continue
        predicted = [predictions[q] for q in test_ids]
        actual = [target[q] for q in test_ids]
        folds.append(FoldCorrelation(
            fold=fold_name,
            pearson=_safe_correlate(predicted, actual, PEARSON, f"fold {fold_name}"),
            kendall=_safe_correlate(predicted, actual, KENDALL, f"fold {fold_name}"),
        ))

    if mode == FOLD_AVERAGE:
        pearson_result = _average([f.pearson for f in folds], len(qids))
        kendall_result = _average([f.kendall for f in folds], len(qids))
    else:
        predicted = [predictions[q] for q in qids]
        actual = [target[q] for q in qids]
        pearson_result = _safe_correlate(predicted, actual, PEARSON, "predicciones agrupadas")
        kendall_result = _safe_correlate(predicted, actual, KENDALL, "predicciones agrupadas")

    return CrossValidationResult(
        mode=mode,
        predictions=predictions,
        folds=folds,
        pearson=pearson_result,
        kendall=kendall_result,
        cross=cross,
    )


# ============================================================
# PERSISTENCIA DE MODELOS
# ============================================================

def _check_version(found: int) -> None:
    if found != MODEL_FORMAT_VERSION:
        raise ConfigurationError(
            f"Versión de formato de modelo no soportada: {found}",
            {"expected": MODEL_FORMAT_VERSION, "found": found},
        )


def dump_cross(cross: CrossFitted) -> str:
    """Guarda los dos modelos de fold, el split y las columnas."""
    return CrossFittedDump(cross=cross).model_dump_json(indent=2)


def load_cross(text: str) -> CrossFitted:
    try:
        dump = CrossFittedDump.model_validate_json(text)
    except ValidationError as e:
        raise ConfigurationError(f"Modelos de fold inválidos: {e.errors()[0]['msg']}")
    _check_version(dump.format_version)
    return dump.cross
