"""
Fixtures compartidas por toda la suite.

Proporciona:
- Modelos del zoo (hypo3, degenerate2, heat_mult, linear_gauss)
- Mallas cortas para que los tests unitarios integren en milisegundos
- write_config: escribe un JSON de experimento en tmp_path
"""

import json
from pathlib import Path

import numpy as np
import pytest

from src.models.model_spec import ModelSpec
from src.models.spaces import TimeGrid
from src.services.model_zoo import polynomial_model, zoo

# ==================== MODELOS ====================


@pytest.fixture
def hypo3() -> ModelSpec:
    """Cadena hipoelíptica 3D con ruido solo en la primera coordenada."""
    return zoo("hypo3")


@pytest.fixture
def degenerate2() -> ModelSpec:
    """Ruido en e1 y segunda coordenada congelada."""
    return zoo("degenerate2")


@pytest.fixture
def heat_mult() -> ModelSpec:
    """Calor truncado (n = m = 8) con ruido multiplicativo."""
    return zoo("heat_mult")


@pytest.fixture
def linear_gauss() -> ModelSpec:
    """Modelo lineal con ruido aditivo (ley gaussiana exacta)."""
    return zoo("linear_gauss")


@pytest.fixture
def cubic_model() -> ModelSpec:
    """
    Modelo polinomial 2D: α(x) = (−x0³, x0·x1), σ_1(x) = (1, x0).

    Tiene derivadas segundas no nulas en deriva y difusión.
    """
    return polynomial_model(
        name="cubic",
        n=2,
        m=1,
        spectrum=[-1.0, -2.0],
        drift=[[(-1.0, (3, 0))], [(1.0, (1, 1))]],
        diffusion=[[[(1.0, (0, 0))], [(1.0, (1, 0))]]],
        initial_x=[0.3, -0.2],
    )


# ==================== MALLAS ====================


@pytest.fixture
def short_grid() -> TimeGrid:
    """T = 1 con 200 pasos."""
    return TimeGrid(T=1.0, steps=200)


@pytest.fixture
def tiny_grid() -> TimeGrid:
    """T = 0.5 con 50 pasos."""
    return TimeGrid(T=0.5, steps=50)


# ==================== CONFIGURACIÓN ====================


@pytest.fixture
def write_config(tmp_path: Path):
    """
    Factory que escribe un experimento JSON y devuelve su ruta.

    El output_dir apunta siempre a tmp_path/runs salvo que se indique otro.
    """

    def _write(payload: dict, name: str = "experiment.json") -> Path:
        data = {"output_dir": str(tmp_path / "runs"), **payload}
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def rng() -> np.random.Generator:
    """Generador fijo para vectores de prueba."""
    return np.random.default_rng(12345)
