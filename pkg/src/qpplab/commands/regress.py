# src/qpplab/commands/regress.py
import argparse
import logging
from typing import Dict, List

from qpplab.commands.common import (
    add_learner_flags,
    csv_list,
    emit,
    learner_spec,
    load_evals,
    load_features,
    write_fold_models,
)
from qpplab.core.errors import UndefinedStatisticError, UsageError
from qpplab.core.output import fmt_float
from qpplab.schemas.reports import ErrorTableRow
from qpplab.services.learners import FOLD_AVERAGE, POOLED, cross_validate, resolve_feature_set
from qpplab.services.reporting import render_error_table
from qpplab.services.statlab import regression_errors

logger = logging.getLogger(__name__)

LEARNERS = ("lr", "rf")


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("regress", parents=[common],
                                   help="modelos combinados con validación cruzada en dos mitades")
    parser.add_argument("--features", type=csv_list, required=True, help="tablas de predictores")
    parser.add_argument("--evals", required=True, help="tabla de evaluación")
    parser.add_argument("--measure", default="NDCG", help="medida objetivo")
    parser.add_argument("--feature-set", action="append", default=None,
                        help="SOTA, LETOR, All, una columna o NOMBRE=col1,col2 (repetible)")
    parser.add_argument("--learners", type=csv_list, default=["lr"], help="lr, rf")
    parser.add_argument("--cv-mode", choices=[FOLD_AVERAGE, POOLED], default=FOLD_AVERAGE)
    parser.add_argument("--predictions-out", default=None, help="TSV con las predicciones fuera de fold")
    parser.add_argument("--model-out", default=None,
                        help="directorio donde guardar los modelos de fold de cada conjunto y learner")
    add_learner_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> None:
    unknown = [name for name in args.learners if name not in LEARNERS]
    if unknown:
        raise UsageError(f"Learner desconocido: {', '.join(unknown)}", {"allowed": list(LEARNERS)})

    features = load_features(args.features)
    evals = load_evals(args.evals, [args.measure])
    target = evals.as_dict(args.measure)
    specs = args.feature_set or ["All"]

    rows: List[ErrorTableRow] = []
    predictions: Dict[str, Dict[str, float]] = {}
    for spec in specs:
        set_name, columns = resolve_feature_set(spec, features)
        for kind in args.learners:
            result = cross_validate(features, target, learner_spec(args, kind), args.seed, columns, args.cv_mode)
            qids = sorted(result.predictions)
            predicted = [result.predictions[q] for q in qids]
            actual = [target[q] for q in qids]
            try:
                report = regression_errors(predicted, actual)
            except UndefinedStatisticError as e:
                logger.warning(f"{set_name}/{kind}: {e.message}")
                report = e.partial
            rows.append(ErrorTableRow(
                feature_set=set_name, learner=kind, measure=args.measure,
                report=report, pearson=result.pearson, kendall=result.kendall,
            ))
            predictions[f"{set_name}/{kind}"] = result.predictions
            if args.model_out:
                write_fold_models(args.model_out, f"{set_name}_{kind}", result.cross)
            logger.info(f"Modelo {set_name}/{kind}: {len(columns)} features, {len(qids)} consultas")

    emit(args, render_error_table(rows, args.format))

    if args.predictions_out:
        labels = list(predictions)
        qids = sorted(next(iter(predictions.values())))
        lines = ["\t".join(["qid"] + labels) + "\n"]
        lines.extend(
            "\t".join([qid] + [fmt_float(predictions[label][qid]) for label in labels]) + "\n" for qid in qids
        )
        emit(args, "".join(lines), out=args.predictions_out)
