# src/qpplab/core/config.py
import logging
from pathlib import Path
from typing import Dict

from pydantic_settings import BaseSettings, SettingsConfigDict

from qpplab.core.errors import UsageError

logger = logging.getLogger(__name__)

# Raíz del proyecto (donde puede estar el .env)
BASE_DIR = Path(__file__).resolve().parent.parent.parent.parent
ENV_PATH = BASE_DIR / ".env"


class Settings(BaseSettings):
    # === CONFIGURACIÓN GENERAL ===
    app_env: str = "production"
    log_level: str = "INFO"

    # === VALORES POR DEFECTO DE LA CLI ===
    default_seed: int = 0
    default_threads: int = 1
    default_format: str = "tsv"

    # === REPORTES ===
    report_decimals: int = 3
    sweep_step: float = 0.01
    max_sweep_points: int = 1_000_000

    model_config = SettingsConfigDict(
        env_prefix="QPPLAB_",
        env_file=str(ENV_PATH) if ENV_PATH.exists() else None,
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


settings = Settings()


# ============================================================
# ARCHIVO DE CONFIGURACIÓN DE EXPERIMENTO (key=value)
# ============================================================

def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """
    Lee un archivo de experimento con líneas `clave=valor`.

    Las líneas vacías y las que empiezan con `#` se ignoran. Las claves se
    normalizan a la forma de flag larga (guiones en vez de guiones bajos).
    """
    values: Dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(
                message=f"{source}:{line_no}: se esperaba 'clave=valor'",
                details={"source": source, "line": line_no},
            )
        key, value = line.split("=", 1)
        key = key.strip().replace("_", "-").lstrip("-")
        if not key:
            raise UsageError(
                message=f"{source}:{line_no}: clave vacía",
                details={"source": source, "line": line_no},
            )
        values[key] = value.strip()
    return values


def load_config_file(path: str) -> Dict[str, str]:
    config_path = Path(path)
    if not config_path.exists():
        raise UsageError(
            message=f"Archivo de configuración no encontrado: {path}",
            details={"path": path},
        )
    logger.info(f"Configuración de experimento cargada desde: {config_path}")
    return parse_config_text(config_path.read_text(encoding="utf-8"), source=str(config_path))
