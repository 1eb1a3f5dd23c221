# src/qpplab/services/selective.py
"""
Procesamiento selectivo de consultas: para cada consulta se elige entre dos
rankers (R1, R2) y se evalúa el meta-sistema resultante frente a cada ranker
por separado y frente al oráculo.

Regla de empates en todas las políticas: gana R1.
"""

import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from qpplab.core.config import settings
from qpplab.core.errors import AlignmentError, ConfigurationError, ProtocolError, QPPLabError
from qpplab.core.output import fmt_float
from qpplab.core.parallel import parallel_map
from qpplab.schemas.features import FeatureTable
from qpplab.schemas.models import CrossFitted, LearnerSpec
from qpplab.schemas.routing import Choice, PairedComparison, RouteResult, SweepPoint, ThresholdSweep
from qpplab.services.learners import fit_cross, predict, two_fold_split
from qpplab.services.statlab import paired_t

logger = logging.getLogger(__name__)

Scores = Mapping[str, float]


def _mean(values: Mapping[str, float]) -> float:
    """Media acumulada en orden de QueryId (resultado exacto e independiente del orden de entrada)."""
    if not values:
        return 0.0
    return math.fsum(values[q] for q in sorted(values)) / len(values)


def _check_same_queries(a: Mapping[str, object], b: Mapping[str, object], what: str) -> None:
    if set(a) != set(b):
        only_a = sorted(set(a) - set(b))
        only_b = sorted(set(b) - set(a))
        raise AlignmentError(
            f"Conjuntos de consultas distintos en {what}",
            {"only_first": only_a[:10], "only_second": only_b[:10]},
        )


# ============================================================
# POLÍTICAS DE ENRUTAMIENTO
# ============================================================

def route_threshold(P: Scores, T: float) -> Dict[str, Choice]:
    """R1 si P(q) <= T, R2 en otro caso."""
    return {qid: Choice.R1 if P[qid] <= T else Choice.R2 for qid in sorted(P)}


def route_pairwise(P1: Scores, P2: Scores) -> Dict[str, Choice]:
    """R2 sólo si P2(q) > P1(q)."""
    _check_same_queries(P1, P2, "el enrutamiento por pares")
    return {qid: Choice.R2 if P2[qid] > P1[qid] else Choice.R1 for qid in sorted(P1)}


def _assign_model(cross: CrossFitted, qid: str, label: str, requested: Optional[str]) -> str:
    if qid in cross.split.fold_a:
        default = "b"
    elif qid in cross.split.fold_b:
        default = "a"
    else:
        raise ProtocolError(
            f"La consulta {qid} no pertenece al split del modelo {label}",
            {"query_id": qid, "ranker": label},
        )
    model_name = requested or default
    if qid in cross.training_ids(model_name):
        raise ProtocolError(
            f"La consulta {qid} está en el entrenamiento del modelo {label}/{model_name}",
            {"query_id": qid, "ranker": label, "model": model_name},
        )
    return model_name


def route_learned(features: FeatureTable, model_r1: CrossFitted, model_r2: CrossFitted,
                  features_r2: Optional[FeatureTable] = None,
                  models: Optional[Mapping[str, str]] = None) -> Dict[str, Choice]:
    """
    Predice la medida de cada ranker con el modelo del fold que NO vio la
    consulta y elige el mayor (empate: R1). `models` permite forzar el
    modelo ("a" o "b") usado para una consulta.

    Raises:
        ProtocolError: la consulta no está en el split o el modelo aplicado
            la tuvo en su entrenamiento
    """
    features_r2 = features if features_r2 is None else features_r2
    models = models or {}
    _check_same_queries(features.rows, features_r2.rows, "las features de R1 y R2")
    predicted: Dict[str, Dict[str, float]] = {}

    for label, cross, table in (("R1", model_r1, features), ("R2", model_r2, features_r2)):
        groups: Dict[str, List[str]] = {"a": [], "b": []}
        for qid in table.query_ids():
            groups[_assign_model(cross, qid, label, models.get(qid))].append(qid)

        values: Dict[str, float] = {}
        for model_name, model in (("a", cross.model_a), ("b", cross.model_b)):
            ids = groups[model_name]
            values.update(zip(ids, (float(v) for v in predict(model, table.matrix(cross.columns, ids)))))
        predicted[label] = values

    return route_pairwise(predicted["R1"], predicted["R2"])


def fit_routing_models(features_r1: FeatureTable, features_r2: FeatureTable, eval1: Scores, eval2: Scores,
                       learner: LearnerSpec, seed: int = 0,
                       columns_r1: Optional[Sequence[str]] = None,
                       columns_r2: Optional[Sequence[str]] = None) -> Tuple[CrossFitted, CrossFitted]:
    """Un regresor por ranker con el protocolo de dos mitades (mismo split para ambos)."""
    qids = _common_queries(features_r1, features_r2, eval1, eval2)
    split = two_fold_split(qids, seed)
    cross_r1 = fit_cross(features_r1.restrict(qids), eval1, learner, split, columns_r1, seed)
    cross_r2 = fit_cross(features_r2.restrict(qids), eval2, learner, split, columns_r2, seed)
    return cross_r1, cross_r2


def replay_learned_routing(features_r1: FeatureTable, features_r2: FeatureTable, eval1: Scores, eval2: Scores,
                           cross_r1: CrossFitted, cross_r2: CrossFitted,
                           params: Optional[Dict[str, str]] = None) -> RouteResult:
    """
    Enruta con modelos ya ajustados (p. ej. cargados con load_cross). Cada
    consulta común debe pertenecer al split de ambos modelos.
    """
    qids = _common_queries(features_r1, features_r2, eval1, eval2)
    choices = route_learned(features_r1.restrict(qids), cross_r1, cross_r2, features_r2.restrict(qids))
    sub1 = {q: eval1[q] for q in qids}
    sub2 = {q: eval2[q] for q in qids}
    return evaluate_policy(choices, sub1, sub2, policy="learned", params=params)


def learned_routing(features_r1: FeatureTable, features_r2: FeatureTable, eval1: Scores, eval2: Scores,
                    learner: LearnerSpec, seed: int = 0,
                    columns_r1: Optional[Sequence[str]] = None,
                    columns_r2: Optional[Sequence[str]] = None) -> RouteResult:
    """
    Entrena un regresor por ranker con el protocolo de dos mitades (mismo
    split para ambos) y enruta cada consulta fuera de fold.
    """
    cross_r1, cross_r2 = fit_routing_models(features_r1, features_r2, eval1, eval2, learner, seed,
                                            columns_r1, columns_r2)
    return replay_learned_routing(features_r1, features_r2, eval1, eval2, cross_r1, cross_r2,
                                  params={"learner": learner.kind, "seed": str(seed)})


def _common_queries(features_r1: FeatureTable, features_r2: FeatureTable, eval1: Scores, eval2: Scores) -> List[str]:
    qids = sorted(set(features_r1.rows) & set(features_r2.rows) & set(eval1) & set(eval2))
    if not qids:
        raise AlignmentError("Sin consultas comunes para el enrutamiento aprendido")
    return qids


# ============================================================
# EVALUACIÓN
# ============================================================

def _oracle_choices(eval1: Scores, eval2: Scores) -> Dict[str, Choice]:
    return {qid: Choice.R2 if eval2[qid] > eval1[qid] else Choice.R1 for qid in sorted(eval1)}


def evaluate_policy(choices: Mapping[str, Choice], eval1: Scores, eval2: Scores,
                    policy: str = "custom", params: Optional[Dict[str, str]] = None) -> RouteResult:
    """
    Puntúa cada consulta con el ranker elegido y compara la media con R1, R2
    y el oráculo; `beats_both` indica que el meta-sistema supera a ambos.
    """
    _check_same_queries(eval1, eval2, "las evaluaciones de R1 y R2")
    _check_same_queries(choices, eval1, "las elecciones de la política")

    ordered = {qid: Choice(choices[qid]) for qid in sorted(choices)}
    meta = {qid: eval2[qid] if c == Choice.R2 else eval1[qid] for qid, c in ordered.items()}
    oracle = _oracle_choices(eval1, eval2)
    oracle_scores = {qid: eval2[qid] if c == Choice.R2 else eval1[qid] for qid, c in oracle.items()}

    mean_meta = _mean(meta)
    mean_r1 = _mean(eval1)
    mean_r2 = _mean(eval2)
    return RouteResult(
        policy=policy,
        params=params or {},
        choices=ordered,
        meta_scores=meta,
        mean_meta=mean_meta,
        mean_r1=mean_r1,
        mean_r2=mean_r2,
        oracle_mean=_mean(oracle_scores),
        beats_both=mean_meta > mean_r1 and mean_meta > mean_r2,
    )


def oracle_route(eval1: Scores, eval2: Scores) -> RouteResult:
    _check_same_queries(eval1, eval2, "el oráculo")
    return evaluate_policy(_oracle_choices(eval1, eval2), eval1, eval2, policy="oracle")


def sweep_thresholds(low: float, high: float, step: float) -> List[float]:
    """
    Umbrales estrictamente crecientes: low - step (o el float anterior a low
    si la resta no lo mueve), low + i*step mientras quede por debajo de high
    (los valores repetidos por redondeo se descartan) y high.

    Raises:
        ConfigurationError: el barrido tendría más de settings.max_sweep_points puntos
    """
    span = (high - low) / step
    if span > settings.max_sweep_points:
        raise ConfigurationError(
            f"El barrido tendría {span:.3g} puntos (máximo {settings.max_sweep_points}); use un paso mayor",
            {"step": step, "min": low, "max": high},
        )

    first = low - step
    if not first < low:
        first = float(np.nextafter(low, -np.inf))
    thresholds: List[float] = [first]
    i = 0
    while True:
        t = low + i * step
        if t >= high:
            break
        if t > thresholds[-1]:
            thresholds.append(t)
        i += 1
    if thresholds[-1] < high:
        thresholds.append(high)
    return thresholds


def threshold_sweep(P: Scores, eval1: Scores, eval2: Scores, step: float = 0.01,
                    threads: int = 1) -> ThresholdSweep:
    """
    Recorre T desde min(P) hasta max(P) con paso `step`. Antes del primer
    umbral se añade T = min(P) - step (todas las consultas a R2); el último
    punto es T = max(P) (todas a R1). Los umbrales interiores se calculan
    como min(P) + i*step para no acumular error.
    """
    if not step > 0 or math.isinf(step):
        raise ConfigurationError(f"El paso del barrido debe ser positivo y finito: {step}", {"step": step})
    if not P:
        raise ConfigurationError("Barrido con P vacío")
    _check_same_queries(P, eval1, "el barrido de umbrales")

    thresholds = sweep_thresholds(min(P.values()), max(P.values()), step)

    def point(t: float) -> SweepPoint:
        result = evaluate_policy(route_threshold(P, t), eval1, eval2, policy="threshold")
        return SweepPoint(threshold=t, mean_meta=result.mean_meta, fraction_r2=result.fraction_r2)

    points = parallel_map(point, thresholds, threads)
    best = max(points, key=lambda pt: pt.mean_meta)
    return ThresholdSweep(points=points, best_threshold=best.threshold, best_mean=best.mean_meta)


# ============================================================
# EXPORTACIÓN
# ============================================================

def sweep_to_tsv(sweep: ThresholdSweep) -> str:
    lines = ["T\tmean_meta\tfraction_R2\n"]
    for pt in sweep.points:
        lines.append(f"{fmt_float(pt.threshold)}\t{fmt_float(pt.mean_meta)}\t{fmt_float(pt.fraction_r2)}\n")
    return "".join(lines)


def choices_to_tsv(results: Sequence[RouteResult]) -> str:
    """Tabla de elecciones por consulta: una columna por política."""
    if not results:
        return ""
    qids = sorted(results[0].choices)
    lines = ["\t".join(["qid"] + [r.policy for r in results]) + "\n"]
    for qid in qids:
        lines.append("\t".join([qid] + [r.choices[qid].value for r in results]) + "\n")
    return "".join(lines)


# ============================================================
# POLÍTICAS COMPLETAS (ELECCIÓN + EVALUACIÓN)
# ============================================================

def threshold_policy(P: Scores, eval1: Scores, eval2: Scores, T: float) -> RouteResult:
    return evaluate_policy(route_threshold(P, T), eval1, eval2, policy="threshold", params={"T": fmt_float(T)})


def pairwise_policy(P1: Scores, P2: Scores, eval1: Scores, eval2: Scores) -> RouteResult:
    choices = route_pairwise(P1, P2)
    if len(set(choices.values())) == 1:
        logger.warning(f"Enrutamiento por pares degenerado: todas las consultas van a {next(iter(choices.values())).value}")
    return evaluate_policy(choices, eval1, eval2, policy="pairwise")



# ============================================================
# COMPARACIÓN CON LOS RANKERS (T-TEST PAREADO)
# ============================================================

def compare_with_rankers(policies: Sequence[RouteResult], eval1: Scores, eval2: Scores) -> List[PairedComparison]:
    """
    t-test pareado de cada meta-sistema contra R1 y contra R2, con
    Bonferroni sobre las 2 * len(policies) comparaciones.
    """
    m = 2 * len(policies)
    comparisons: List[PairedComparison] = []
    for result in policies:
        qids = sorted(result.meta_scores)
        meta = [result.meta_scores[q] for q in qids]
        for baseline, scores in (("R1", eval1), ("R2", eval2)):
            try:
                test = paired_t(meta, [scores[q] for q in qids], m)
            except QPPLabError as e:
                logger.warning(f"t-test {result.label} vs {baseline} no definido: {e.message}")
                test = None
            comparisons.append(PairedComparison(system=result.label, baseline=baseline, result=test))
    return comparisons
