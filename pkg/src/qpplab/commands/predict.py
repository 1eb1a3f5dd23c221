# src/qpplab/commands/predict.py
import argparse
import logging
from typing import List

from qpplab.commands.common import csv_list, emit, require
from qpplab.core.errors import UsageError
from qpplab.schemas.features import FeatureTable
from qpplab.schemas.predictors import DEFAULT_LETOR_FEATURES, Aggregator, PredictorConfig, WigVariant
from qpplab.services.corpus_io import (
    align_query_sets,
    feature_table_to_tsv,
    letor_scores_for_run,
    load_corpus_scores,
    load_feature_table,
    load_letor_sidecar,
    load_run,
    load_term_stats,
    merge_feature_tables,
)
from qpplab.services.qpp_letor import compute_letor
from qpplab.services.qpp_sota import compute_sota
from qpplab.services.reporting import fixed, markdown_table

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("predict", parents=[common], help="calcula y fusiona predictores QPP")
    parser.add_argument("--run", required=True, help="run cuyas consultas se predicen")
    parser.add_argument("--sota", action="store_true", help="calcula UQC, NQC, WIG (y QF)")
    parser.add_argument("--letor", action="store_true", help="calcula features LETOR normalizadas")
    parser.add_argument("--features", type=csv_list, default=[], help="tablas externas a ingerir (p. ej. B_bi)")

    sota = parser.add_argument_group("predictores SOTA")
    sota.add_argument("--sota-run", default=None, help="run de referencia para SOTA (por defecto --run)")
    sota.add_argument("--feedback-run", default=None, help="run con la consulta expandida (QF)")
    sota.add_argument("--corpus-scores", default=None)
    sota.add_argument("--term-stats", default=None)
    defaults = PredictorConfig()
    sota.add_argument("--k-nqc", type=int, default=defaults.k_nqc)
    sota.add_argument("--k-uqc", type=int, default=defaults.k_uqc)
    sota.add_argument("--k-wig", type=int, default=defaults.k_wig)
    sota.add_argument("--qf-depth", type=int, default=defaults.qf_depth)
    sota.add_argument("--wig-variant", choices=[v.value for v in WigVariant], default=defaults.wig_variant.value)

    letor = parser.add_argument_group("predictores LETOR")
    letor.add_argument("--letor-sidecar", default=None, help="TSV qid docid feature value")
    letor.add_argument("--letor-run", default=None, help="run cuyo top-k se resume (por defecto --run)")
    letor.add_argument("--letor-features", type=csv_list, default=list(DEFAULT_LETOR_FEATURES))
    letor.add_argument("--aggregators", type=csv_list, default=[Aggregator.Mean.value])
    letor.add_argument("--letor-k", type=int, default=100)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> None:
    if not (args.sota or args.letor or args.features):
        raise UsageError("Nada que calcular: use --sota, --letor o --features")

    target_run = load_run(args.run)
    tables: List[FeatureTable] = []
    labels: List[str] = []

    if args.sota:
        require(args, "corpus_scores")
        config = PredictorConfig(
            k_nqc=args.k_nqc, k_uqc=args.k_uqc, k_wig=args.k_wig,
            qf_depth=args.qf_depth, wig_variant=args.wig_variant,
        )
        sota_run = load_run(args.sota_run) if args.sota_run else target_run
        tables.append(compute_sota(
            sota_run,
            config,
            load_corpus_scores(args.corpus_scores),
            load_term_stats(args.term_stats) if args.term_stats else None,
            load_run(args.feedback_run) if args.feedback_run else None,
            threads=args.threads,
        ))
        labels.append("sota")

    if args.letor:
        require(args, "letor_sidecar", "term_stats")
        try:
            aggregators = [Aggregator(a) for a in args.aggregators]
        except ValueError:
            raise UsageError(f"Agregador desconocido en {args.aggregators}", {"allowed": [a.value for a in Aggregator]})
        letor_run = load_run(args.letor_run) if args.letor_run else target_run
        scores = letor_scores_for_run(load_letor_sidecar(args.letor_sidecar), letor_run, args.letor_k, args.letor_features)
        tables.append(compute_letor(letor_run, scores, load_term_stats(args.term_stats), aggregators,
                                    args.letor_k, threads=args.threads))
        labels.append("letor")

    for path in args.features:
        tables.append(load_feature_table(path))
        labels.append(path)

    merged = merge_feature_tables(tables, labels) if len(tables) > 1 else tables[0]
    qids = align_query_sets([(f"run '{target_run.run_tag}'", target_run.query_ids()), ("predictores", merged.query_ids())])
    merged = merged.restrict(qids)
    logger.info(f"Tabla de predictores: {len(merged.columns)} columnas, {len(qids)} consultas")

    if args.format == "markdown":
        rows = [[qid] + [fixed(v) for v in merged.rows[qid]] for qid in merged.query_ids()]
        emit(args, markdown_table(["qid"] + list(merged.columns), rows))
    else:
        emit(args, feature_table_to_tsv(merged))
