"""
Configuración común de pytest para las suites de qpplab.
"""

import sys
from pathlib import Path

import pytest

# Rutas absolutas: el paquete vive en src/
PROJECT_ROOT = Path(__file__).resolve().parent
sys.path.insert(0, str(PROJECT_ROOT / "src"))


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)
