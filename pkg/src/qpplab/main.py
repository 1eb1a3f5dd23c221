# src/qpplab/main.py
"""
Punto de entrada de la CLI `qpplab`.

Un solo ejecutable con subcomandos (eval, predict, correlate, regress,
anova, select, report, synth). Los errores conocidos se traducen a códigos
de salida: 0 éxito, 1 uso, 2 lectura, 3 alineación, 4 conflicto de fusión.
"""

import argparse
import logging
import sys
from typing import Dict, List, Optional

from pydantic import ValidationError

from qpplab import __version__
from qpplab.commands import anova, correlate, eval as eval_cmd, predict, regress, report, select, synth
from qpplab.commands.common import common_parser, experiment_config
from qpplab.core.config import load_config_file, settings
from qpplab.core.errors import QPPLabError, UsageError

logger = logging.getLogger(__name__)

COMMANDS = (eval_cmd, predict, correlate, regress, anova, select, report, synth)
TRUE_VALUES = {"1", "true", "yes", "on"}
FALSE_VALUES = {"0", "false", "no", "off"}


class CliParser(argparse.ArgumentParser):
    """ArgumentParser que lanza UsageError en lugar de terminar el proceso."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="qpplab", description="Laboratorio de predicción de rendimiento de consultas (QPP)")
    parser.add_argument("--version", action="version", version=f"qpplab {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMANDO")
    common = common_parser()
    for module in COMMANDS:
        module.register(subparsers, common)
    return parser


def setup_logging(args: Optional[argparse.Namespace] = None) -> None:
    level = getattr(logging, settings.log_level.upper(), logging.INFO)
    if args is not None and args.verbose:
        level = logging.DEBUG
    elif args is not None and args.quiet:
        level = logging.ERROR
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )


# ============================================================
# ARCHIVO DE CONFIGURACIÓN
# ============================================================

def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise UsageError(f"Subcomando desconocido: {command}")


def _convert(action: argparse.Action, key: str, raw: str):
    if action.nargs == 0:
        value = raw.strip().lower()
        if value in TRUE_VALUES:
            return True
        if value in FALSE_VALUES:
            return False
        raise UsageError(f"Valor booleano inválido para '{key}': {raw}")

    try:
        if isinstance(action, argparse._AppendAction):
            items = [item.strip() for item in raw.split(",") if item.strip()]
            return [action.type(item) if action.type else item for item in items]
        value = action.type(raw) if action.type else raw
    except (argparse.ArgumentTypeError, ValueError) as e:
        raise UsageError(f"Valor inválido para '{key}': {raw} ({e})")

    if action.choices is not None and value not in action.choices:
        raise UsageError(f"Valor inválido para '{key}': {raw}", {"allowed": list(action.choices)})
    return value


def apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, values: Dict[str, str]) -> None:
    """Los valores del archivo de configuración sobrescriben los flags de la línea de comandos."""
    options = _subparser(parser, args.command)._option_string_actions
    for key, raw in values.items():
        action = options.get(f"--{key}")
        if action is None or key in ("config", "help"):
            raise UsageError(f"Clave de configuración desconocida para '{args.command}': {key}")
        setattr(args, action.dest, _convert(action, key, raw))
        logger.debug(f"Config: {action.dest} = {raw}")


# ============================================================
# MAIN
# ============================================================

def main(argv: Optional[List[str]] = None) -> int:
    setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # --help y --version
        return int(e.code or 0)
    except UsageError as e:
        logger.error(e.message)
        return e.exit_code

    setup_logging(args)
    try:
        if args.config:
            apply_config(parser, args, load_config_file(args.config))
        experiment = experiment_config(args)
        logger.debug(f"Comando '{args.command}': {experiment.model_dump()}")
        args.handler(args)
    except QPPLabError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        if e.details:
            logger.debug(f"Detalles: {e.details}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Parámetros inválidos: {e.errors()}")
        return 1
    except Exception as e:
        logger.error(f"Error no controlado: {type(e).__name__}: {str(e)}", exc_info=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
