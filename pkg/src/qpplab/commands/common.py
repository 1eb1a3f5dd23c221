# src/qpplab/commands/common.py
"""Piezas compartidas por los subcomandos: flags comunes, salida y carga de tablas."""

import argparse
import logging
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError

from qpplab.core.config import settings
from qpplab.core.errors import UsageError
from qpplab.core.output import build_header, write_output
from qpplab.schemas.evaluation import EvalTable
from qpplab.schemas.experiment import ExperimentConfig
from qpplab.schemas.features import FeatureTable
from qpplab.schemas.models import CrossFitted, ForestParams, LearnerSpec
from qpplab.schemas.predictors import PredictorConfig
from qpplab.services.corpus_io import load_eval_table, load_feature_table, merge_feature_tables
from qpplab.services.learners import dump_cross, load_cross
from qpplab.services.reporting import FORMATS

logger = logging.getLogger(__name__)

# Flags cuyo valor es una ruta (o lista de rutas) de entrada
INPUT_FLAGS = (
    "run", "qrels", "features", "evals", "evals1", "evals2", "records",
    "sota_run", "feedback_run", "corpus_scores", "term_stats", "letor_sidecar", "letor_run",
    "predictor", "predictor_r1", "predictor_r2", "features_r1", "features_r2", "models_r1", "models_r2",
)


def csv_list(value: str) -> List[str]:
    """Tipo argparse para listas separadas por comas."""
    items = [item.strip() for item in value.split(",") if item.strip()]
    if not items:
        raise argparse.ArgumentTypeError("lista vacía")
    return items


def common_parser() -> argparse.ArgumentParser:
    """Flags que aceptan todos los subcomandos."""
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("opciones comunes")
    group.add_argument("--format", choices=FORMATS, default=settings.default_format,
                       help="formato de salida (tsv sin pérdida o markdown)")
    group.add_argument("--seed", type=int, default=settings.default_seed, help="semilla de toda la aleatoriedad")
    group.add_argument("--threads", type=int, default=settings.default_threads,
                       help="número máximo de hilos (no cambia los resultados)")
    group.add_argument("--out", default=None, help="archivo de salida (por defecto stdout)")
    group.add_argument("--config", default=None, help="archivo clave=valor que sobrescribe los flags")
    group.add_argument("--verbose", action="store_true", help="logging a nivel DEBUG")
    group.add_argument("--quiet", action="store_true", help="sólo errores en el log")
    return parser


def add_learner_flags(parser: argparse.ArgumentParser) -> None:
    defaults = ForestParams()
    parser.add_argument("--n-trees", type=int, default=defaults.n_trees)
    parser.add_argument("--max-depth", type=int, default=defaults.max_depth)
    parser.add_argument("--min-leaf", type=int, default=defaults.min_leaf)


def learner_spec(args: argparse.Namespace, kind: str) -> LearnerSpec:
    return LearnerSpec(
        kind=kind,
        forest=ForestParams(n_trees=args.n_trees, max_depth=args.max_depth, min_leaf=args.min_leaf),
        threads=max(1, args.threads),
    )


def header_for(args: argparse.Namespace) -> str:
    return build_header(args.command, vars(args), args.seed)


def emit(args: argparse.Namespace, text: str, out: Optional[str] = None) -> None:
    """Escribe `text` con la cabecera de reproducibilidad en `out` (o en --out / stdout)."""
    write_output(text, out if out is not None else args.out, header_for(args))


def write_fold_models(directory: str, name: str, cross: CrossFitted) -> str:
    """Guarda los modelos de fold en `<directory>/<name>.json` (JSON puro, sin cabecera)."""
    path = Path(directory) / f"{name}.json"
    write_output(dump_cross(cross), str(path))
    return str(path)


def read_fold_models(path: str) -> CrossFitted:
    return load_cross(Path(path).read_text(encoding="utf-8"))


def load_features(paths: Sequence[str]) -> FeatureTable:
    """Carga una o varias tablas de features; varias se fusionan por consulta."""
    if not paths:
        raise UsageError("Se requiere al menos una tabla de features")
    tables = [load_feature_table(path) for path in paths]
    if len(tables) == 1:
        return tables[0]
    return merge_feature_tables(tables, labels=list(paths))


def load_evals(path: str, measures: Optional[Sequence[str]] = None) -> EvalTable:
    table = load_eval_table(path)
    if not measures:
        return table
    missing = [m for m in measures if m not in table.measures]
    if missing:
        raise UsageError(f"Medidas ausentes en {path}: {', '.join(missing)}", {"available": list(table.measures)})
    indices = [table.measures.index(m) for m in measures]
    return EvalTable(
        measures=tuple(measures),
        rows={qid: tuple(values[i] for i in indices) for qid, values in table.rows.items()},
    )


def require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{name.replace('_', '-')}" for name in names if getattr(args, name, None) in (None, [])]
    if missing:
        raise UsageError(f"Faltan flags requeridos para '{args.command}': {', '.join(missing)}")


def experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    """Arma la configuración efectiva de la ejecución y comprueba que las entradas existan."""
    inputs = {}
    for flag in INPUT_FLAGS:
        value = getattr(args, flag, None)
        if value:
            inputs[flag] = tuple(value) if isinstance(value, list) else (value,)
    try:
        predictor = None
        if hasattr(args, "k_nqc"):
            predictor = PredictorConfig(
                k_nqc=args.k_nqc, k_uqc=args.k_uqc, k_wig=args.k_wig,
                qf_depth=args.qf_depth, wig_variant=args.wig_variant,
            )
        forest = None
        if hasattr(args, "n_trees"):
            forest = ForestParams(n_trees=args.n_trees, max_depth=args.max_depth, min_leaf=args.min_leaf)
        return ExperimentConfig(
            command=args.command, inputs=inputs, predictor=predictor,
            forest=forest, seed=args.seed, out=args.out,
        )
    except ValidationError as e:
        raise UsageError(f"Configuración inválida: {e.errors()[0]['msg']}", {"command": args.command})
