# src/qpplab/commands/eval.py
import argparse
import logging

from qpplab.commands.common import csv_list, emit
from qpplab.services.corpus_io import load_qrels, load_run
from qpplab.services.effectiveness import DEFAULT_MEASURES, eval_table_to_tsv, evaluate_run
from qpplab.services.reporting import fixed, markdown_table

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("eval", parents=[common], help="evalúa un run contra los qrels")
    parser.add_argument("--run", required=True, help="run en formato TREC")
    parser.add_argument("--qrels", required=True, help="qrels en formato TREC")
    parser.add_argument("--measures", type=csv_list, default=list(DEFAULT_MEASURES),
                        help="medidas separadas por comas (NDCG, NDCG@k, MAP, P@k, MRR@k)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> None:
    table = evaluate_run(load_run(args.run), load_qrels(args.qrels), args.measures, threads=args.threads)

    if args.format == "markdown":
        means = table.means()
        rows = [[qid] + [fixed(v) for v in table.rows[qid]] for qid in table.query_ids()]
        rows.append(["MEAN"] + [fixed(means[m]) for m in table.measures])
        emit(args, markdown_table(["qid"] + list(table.measures), rows))
    else:
        emit(args, eval_table_to_tsv(table))
