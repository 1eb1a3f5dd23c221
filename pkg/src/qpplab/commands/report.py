# src/qpplab/commands/report.py
import argparse
import logging

from qpplab.commands.common import csv_list, emit
from qpplab.services.corpus_io import read_text
from qpplab.services.reporting import (
    GROUP_FACTORS,
    boxplot_data,
    correlations_from_records,
    merge_reports,
    parse_records,
    render_boxplots,
    render_correlation_table,
)

logger = logging.getLogger(__name__)

KINDS = ("table", "boxplot")


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("report", parents=[common],
                                   help="fusiona registros de correlación en una tabla o en datos de boxplot")
    parser.add_argument("--records", type=csv_list, required=True, help="registros TSV de correlate")
    parser.add_argument("--kind", choices=KINDS, default="table")
    parser.add_argument("--group-by", choices=GROUP_FACTORS, default="ranker", help="agrupación del boxplot")
    parser.add_argument("--coefficient", default=None, help="filtra por coeficiente")
    parser.add_argument("--measure", default=None, help="filtra por medida")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> None:
    report = merge_reports([parse_records(read_text(path), source=path) for path in args.records])
    logger.info(f"{len(report.records)} registros leídos de {len(args.records)} archivos")

    if args.kind == "boxplot":
        values = correlations_from_records(report, args.coefficient, args.measure)
        emit(args, render_boxplots(boxplot_data(values, args.group_by), args.format))
        return

    if args.coefficient or args.measure:
        report = report.model_copy(update={"records": [
            r for r in report.records
            if (args.coefficient is None or r.coefficient == args.coefficient)
            and (args.measure is None or r.measure == args.measure)
        ]})
    emit(args, render_correlation_table(report, args.format))
