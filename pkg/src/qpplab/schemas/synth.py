# src/qpplab/schemas/synth.py
from pydantic import BaseModel, ConfigDict, Field


class SynthParams(BaseModel):
    """Parámetros del generador de colecciones sintéticas."""
    seed: int = 0
    n_queries: int = Field(200, ge=4)
    n_docs: int = Field(50, ge=2)
    informativeness: float = Field(1.0, ge=0.0, le=1.0)

    model_config = ConfigDict(frozen=True)
