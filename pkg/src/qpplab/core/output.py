# src/qpplab/core/output.py
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional

from qpplab import __version__

logger = logging.getLogger(__name__)

# Flags que no cambian el contenido de los archivos
UNRECORDED_FLAGS = {"threads", "out", "verbose", "quiet", "config", "command", "handler"}


def canonical_flags(flags: Dict[str, Any]) -> str:
    """JSON canónico (claves ordenadas) del conjunto de flags que afecta a la salida."""
    recorded = {k: v for k, v in flags.items() if k not in UNRECORDED_FLAGS}
    return json.dumps(recorded, sort_keys=True, separators=(",", ":"), default=str)


def build_header(command: str, flags: Dict[str, Any], seed: Optional[int]) -> str:
    return f"# qpplab {__version__} {command} seed={seed} flags={canonical_flags(flags)}\n"


def fmt_float(value: float) -> str:
    """Formato sin pérdida para TSV: `repr` reparsea al mismo float."""
    return repr(float(value))


def write_output(text: str, out: Optional[str], header: str = "") -> None:
    """
    Escribe `header + text` en `out`, o en stdout si `out` es None o "-".
    Se escribe siempre con LF para que la salida sea idéntica byte a byte.
    """
    content = header + text
    if out is None or out == "-":
        sys.stdout.write(content)
        sys.stdout.flush()
        return
    path = Path(out)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(content)
    logger.info(f"Archivo escrito: {path}")
