# src/qpplab/commands/synth.py
import argparse
import json
import logging
from pathlib import Path

from qpplab.commands.common import header_for
from qpplab.core.errors import UsageError
from qpplab.core.output import write_output
from qpplab.schemas.synth import SynthParams
from qpplab.services.synth import MANIFEST, generate_collection

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("synth", parents=[common], help="genera una colección sintética reproducible")
    defaults = SynthParams()
    parser.add_argument("--n-queries", type=int, default=defaults.n_queries)
    parser.add_argument("--n-docs", type=int, default=defaults.n_docs)
    parser.add_argument("--informativeness", type=float, default=defaults.informativeness,
                        help="0 = predictor independiente, 1 = monótono en el NDCG real")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> None:
    if not args.out or args.out == "-":
        raise UsageError("synth requiere --out con un directorio de destino")
    target = Path(args.out)
    if target.exists() and not target.is_dir():
        raise UsageError(f"--out debe ser un directorio: {args.out}")

    params = SynthParams(
        seed=args.seed,
        n_queries=args.n_queries,
        n_docs=args.n_docs,
        informativeness=args.informativeness,
    )
    files = generate_collection(params)
    target.mkdir(parents=True, exist_ok=True)

    header = header_for(args)
    for name, content in files.items():
        if name == MANIFEST:
            # JSON no admite comentarios: la cabecera va como clave
            manifest = json.loads(content)
            manifest["header"] = header.strip()
            write_output(json.dumps(manifest, indent=2, sort_keys=True) + "\n", str(target / name))
        else:
            write_output(content, str(target / name), header)
    logger.info(f"Colección sintética escrita en {target} ({len(files)} archivos)")
