# src/qpplab/commands/correlate.py
import argparse
import logging

from qpplab.commands.common import csv_list, emit, load_evals, load_features
from qpplab.core.errors import UsageError
from qpplab.services.reporting import (
    correlation_matrix,
    correlation_table,
    render_correlation_table,
    render_matrix,
    scatter_export,
)
from qpplab.services.statlab import COEFFICIENTS

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("correlate", parents=[common],
                                   help="correlación entre predictores y medidas de efectividad")
    parser.add_argument("--features", type=csv_list, required=True, help="tablas de predictores")
    parser.add_argument("--evals", required=True, help="tabla de evaluación (salida de eval)")
    parser.add_argument("--measures", type=csv_list, default=None, help="subconjunto de medidas")
    parser.add_argument("--coefficient", type=csv_list, default=list(COEFFICIENTS), help="pearson, kendall")
    parser.add_argument("--ranker", default="-", help="etiqueta del ranker en los registros")
    parser.add_argument("--collection", default="-", help="etiqueta de la colección en los registros")
    parser.add_argument("--matrix", action="store_true", help="matriz de correlación en lugar de tabla")
    parser.add_argument("--scatter", default=None, metavar="PREDICTOR:MEDIDA",
                        help="exporta los puntos (predicho, real) de un par")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> None:
    features = load_features(args.features)
    evals = load_evals(args.evals, args.measures)

    if args.scatter:
        predictor, sep, measure = args.scatter.partition(":")
        if not sep or predictor not in features.columns or measure not in evals.measures:
            raise UsageError(f"--scatter inválido: {args.scatter}", {"features": list(features.columns),
                                                                     "measures": list(evals.measures)})
        emit(args, scatter_export(features.as_dict(predictor), evals.as_dict(measure), predictor, measure))
        return

    if args.matrix:
        matrix = correlation_matrix(features, evals, args.coefficient[0], threads=args.threads)
        emit(args, render_matrix(matrix, args.format))
        return

    report = correlation_table(features, evals, args.coefficient, args.ranker, args.collection, threads=args.threads)
    emit(args, render_correlation_table(report, args.format))
