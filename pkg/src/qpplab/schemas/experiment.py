# src/qpplab/schemas/experiment.py
from pathlib import Path
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

from qpplab.schemas.models import ForestParams
from qpplab.schemas.predictors import PredictorConfig


class ExperimentConfig(BaseModel):
    """
    Configuración efectiva de una ejecución de la CLI (flags + archivo de
    configuración ya aplicado). `inputs` guarda, por flag, las rutas de
    entrada; todas deben existir al cargar.
    """
    command: str
    inputs: Dict[str, Tuple[str, ...]] = {}
    predictor: Optional[PredictorConfig] = None
    forest: Optional[ForestParams] = None
    seed: int = 0
    out: Optional[str] = None

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_inputs(self):
        missing = [
            f"--{flag.replace('_', '-')}={path}"
            for flag, paths in self.inputs.items()
            for path in paths
            if not Path(path).is_file()
        ]
        if missing:
            raise ValueError(f"Archivos de entrada inexistentes: {', '.join(missing)}")
        return self
