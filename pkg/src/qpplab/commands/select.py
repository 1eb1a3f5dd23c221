# src/qpplab/commands/select.py
import argparse
import logging
from typing import Dict, List, Optional, Tuple

from qpplab.commands.common import (
    add_learner_flags,
    emit,
    learner_spec,
    load_evals,
    load_features,
    read_fold_models,
    write_fold_models,
)
from qpplab.core.config import settings
from qpplab.core.errors import UsageError
from qpplab.schemas.features import FeatureTable
from qpplab.schemas.routing import RouteResult
from qpplab.services.corpus_io import align_query_sets
from qpplab.services.learners import resolve_feature_set
from qpplab.services.reporting import render_paired_tests, render_routing_summary
from qpplab.services.selective import (
    choices_to_tsv,
    compare_with_rankers,
    fit_routing_models,
    oracle_route,
    pairwise_policy,
    replay_learned_routing,
    sweep_to_tsv,
    threshold_policy,
    threshold_sweep,
)

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("select", parents=[common], help="enrutamiento selectivo entre dos rankers")
    parser.add_argument("--evals1", required=True, help="evaluación del ranker R1")
    parser.add_argument("--evals2", required=True, help="evaluación del ranker R2")
    parser.add_argument("--measure", default="NDCG")

    threshold = parser.add_argument_group("política de umbral")
    threshold.add_argument("--predictor", default=None, help="tabla con el predictor P de la política de umbral")
    threshold.add_argument("--predictor-column", default=None, help="columna de P (por defecto la única)")
    threshold.add_argument("--step", type=float, default=settings.sweep_step, help="paso del barrido de T")
    threshold.add_argument("--threshold", type=float, default=None, help="T fijo (si no, el mejor del barrido)")
    threshold.add_argument("--sweep-out", default=None, help="TSV con la curva del barrido")

    pairwise = parser.add_argument_group("política por pares")
    pairwise.add_argument("--predictor-r1", default=None, help="predicción de efectividad de R1")
    pairwise.add_argument("--predictor-r2", default=None, help="predicción de efectividad de R2")

    learned = parser.add_argument_group("política aprendida")
    learned.add_argument("--features-r1", default=None, help="features de R1 para el regresor")
    learned.add_argument("--features-r2", default=None, help="features de R2 para el regresor")
    learned.add_argument("--feature-set", default="All")
    learned.add_argument("--learner", choices=["lr", "rf"], default="lr")
    learned.add_argument("--models-r1", default=None, help="modelos de fold de R1 guardados (repite el enrutamiento)")
    learned.add_argument("--models-r2", default=None, help="modelos de fold de R2 guardados")
    learned.add_argument("--model-out", default=None, help="directorio donde guardar los modelos de fold")
    add_learner_flags(learned)

    parser.add_argument("--choices-out", default=None, help="TSV con la elección por consulta de cada política")
    parser.set_defaults(handler=run)


def _pick_column(table: FeatureTable, column: Optional[str], path: str) -> str:
    if column is None:
        if len(table.columns) != 1:
            raise UsageError(
                f"{path} tiene varias columnas; indique --predictor-column",
                {"columns": list(table.columns)},
            )
        return table.columns[0]
    if column not in table.columns:
        raise UsageError(f"Columna '{column}' ausente en {path}", {"columns": list(table.columns)})
    return column


def run(args: argparse.Namespace) -> None:
    if bool(args.predictor_r1) != bool(args.predictor_r2):
        raise UsageError("--predictor-r1 y --predictor-r2 van juntos")
    if bool(args.features_r1) != bool(args.features_r2):
        raise UsageError("--features-r1 y --features-r2 van juntos")
    if bool(args.models_r1) != bool(args.models_r2):
        raise UsageError("--models-r1 y --models-r2 van juntos")
    if args.models_r1 and not args.features_r1:
        raise UsageError("--models-r1 requiere --features-r1 y --features-r2")

    eval1 = load_evals(args.evals1, [args.measure])
    eval2 = load_evals(args.evals2, [args.measure])
    sets: List[Tuple[str, object]] = [("evals1", eval1.query_ids()), ("evals2", eval2.query_ids())]

    tables: Dict[str, FeatureTable] = {}
    for flag in ("predictor", "predictor_r1", "predictor_r2", "features_r1", "features_r2"):
        path = getattr(args, flag)
        if path:
            tables[flag] = load_features([path])
            sets.append((path, tables[flag].query_ids()))
    qids = align_query_sets(sets)

    all1, all2 = eval1.as_dict(args.measure), eval2.as_dict(args.measure)
    e1 = {q: all1[q] for q in qids}
    e2 = {q: all2[q] for q in qids}

    policies: List[RouteResult] = []
    if "predictor" in tables:
        table = tables["predictor"]
        column = _pick_column(table, args.predictor_column, args.predictor)
        P = {q: table.value(q, column) for q in qids}
        sweep = threshold_sweep(P, e1, e2, args.step, threads=args.threads)
        T = sweep.best_threshold if args.threshold is None else args.threshold
        logger.info(f"Mejor umbral del barrido: T={sweep.best_threshold!r} (media {sweep.best_mean!r})")
        policies.append(threshold_policy(P, e1, e2, T))
        if args.sweep_out:
            emit(args, sweep_to_tsv(sweep), out=args.sweep_out)

    if "predictor_r1" in tables:
        t1, t2 = tables["predictor_r1"], tables["predictor_r2"]
        c1 = _pick_column(t1, args.predictor_column, args.predictor_r1)
        c2 = _pick_column(t2, args.predictor_column, args.predictor_r2)
        policies.append(pairwise_policy(
            {q: t1.value(q, c1) for q in qids}, {q: t2.value(q, c2) for q in qids}, e1, e2,
        ))

    if "features_r1" in tables:
        f1 = tables["features_r1"].restrict(qids)
        f2 = tables["features_r2"].restrict(qids)
        if args.models_r1:
            cross_r1 = read_fold_models(args.models_r1)
            cross_r2 = read_fold_models(args.models_r2)
            params = {"models": "loaded"}
        else:
            _, columns_r1 = resolve_feature_set(args.feature_set, f1)
            _, columns_r2 = resolve_feature_set(args.feature_set, f2)
            cross_r1, cross_r2 = fit_routing_models(
                f1, f2, e1, e2, learner_spec(args, args.learner), args.seed, columns_r1, columns_r2,
            )
            params = {"learner": args.learner, "seed": str(args.seed)}
        if args.model_out:
            write_fold_models(args.model_out, "R1", cross_r1)
            write_fold_models(args.model_out, "R2", cross_r2)
        policies.append(replay_learned_routing(f1, f2, e1, e2, cross_r1, cross_r2, params))

    if not policies:
        logger.warning("Sin predictores: sólo se reportan R1, R2 y el oráculo")

    oracle = oracle_route(e1, e2)
    text = render_routing_summary(oracle, policies, args.format)
    if policies:
        text += "\n" + render_paired_tests(compare_with_rankers(policies, e1, e2), args.format)
    emit(args, text)
    if args.choices_out:
        emit(args, choices_to_tsv([oracle] + policies), out=args.choices_out)
