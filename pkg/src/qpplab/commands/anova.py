# src/qpplab/commands/anova.py
import argparse
import logging

from qpplab.commands.common import csv_list, emit
from qpplab.services.corpus_io import read_text
from qpplab.services.reporting import GROUP_FACTORS, anova_from_records, merge_reports, parse_records, render_anova

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("anova", parents=[common],
                                   help="ANOVA de un factor sobre registros de correlación")
    parser.add_argument("--records", type=csv_list, required=True, help="registros TSV de correlate")
    parser.add_argument("--factors", type=csv_list, default=["collection", "ranker"],
                        help=f"factores a analizar ({', '.join(GROUP_FACTORS)})")
    parser.add_argument("--coefficient", default=None, help="filtra por coeficiente")
    parser.add_argument("--measure", default=None, help="filtra por medida")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> None:
    report = merge_reports([parse_records(read_text(path), source=path) for path in args.records])
    tables = [anova_from_records(report, factor, args.coefficient, args.measure) for factor in args.factors]
    emit(args, render_anova(tables, args.format))
