"""
Cantidades derivadas de los coeficientes (σ_0, Σ(x)) y zoo de modelos.

Zoo:
- heat_mult: ecuación del calor truncada (n = m = 8) con ruido multiplicativo.
- hypo3: cadena de Kolmogorov hipoelíptica (n = 3, m = 1).
- degenerate2: segunda coordenada determinista (n = 2, m = 1).
- linear_gauss: modelo lineal con ley gaussiana cerrada (n = m = 4).

Las sumas sobre k (corrección de Stratonovich, Σ(x)) se truncan en m.
"""

from collections.abc import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from src.core.exceptions import LabError
from src.core.logging_config import get_logger
from src.models.fields import (
    ConstantDiffusion,
    CoordinateTanhDiffusion,
    DiffusionFamily,
    InvalidModelError,
    LinearField,
    TanhField,
    polynomial_field,
)
from src.models.model_spec import ModelSpec
from src.models.spaces import Semigroup, TruncationConfig

logger = get_logger(__name__)

# ==================== CONSTANTES DEL ZOO ====================

HEAT_DIM = 8
HEAT_SPECTRUM_SCALE = 0.05
LINEAR_GAUSS_SPECTRUM = (-0.5, -1.0, -1.5, -2.0)
LINEAR_GAUSS_DRIFT = (
    (-0.5, 0.3, 0.0, 0.1),
    (-0.2, -0.4, 0.2, 0.0),
    (0.0, -0.1, -0.3, 0.2),
    (0.1, 0.0, -0.2, -0.5),
)
LINEAR_GAUSS_DIFFUSION = (
    (0.5, 0.1, 0.0, 0.0),
    (0.0, 0.4, 0.0, 0.0),
    (0.0, 0.0, 0.3, 0.0),
    (0.0, 0.0, 0.0, 0.2),
)
LINEAR_GAUSS_INITIAL = (1.0, -0.5, 0.25, 0.0)

Monomial = tuple[float, Sequence[int]]


# ==================== EXCEPCIONES PERSONALIZADAS ====================


class UnknownModelError(LabError):
    """El nombre no corresponde a ningún modelo del zoo."""

    def __init__(self, name: str, available: Sequence[str]):
        self.name = name
        self.available = tuple(available)
        super().__init__(f"Modelo '{name}' desconocido; disponibles: {', '.join(self.available)}")


# ==================== CANTIDADES DERIVADAS ====================


def sigma0(model: ModelSpec, x: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Deriva de Stratonovich σ_0(x) = Ax + α(x) − ½ Σ_k σ'_k(x)σ_k(x).

    Args:
        model: Modelo.
        x: Punto de evaluación.

    Returns:
        Vector de dimensión n.
    """
    correction = np.einsum("kij,jk->i", model.diffusion.jacobians(x), model.diffusion.assemble(x))
    return model.sg.apply_generator(x) + model.drift.eval(x) - 0.5 * correction


def big_sigma(model: ModelSpec, x: NDArray[np.float64]) -> NDArray[np.float64]:
    """Σ(x) = Σ_k σ'_k(x)·σ'_k(x) (composición de jacobianos)."""
    jacobians = model.diffusion.jacobians(x)
    return np.einsum("kij,kjl->il", jacobians, jacobians)


# ==================== ZOO ====================


def _heat_mult() -> ModelSpec:
    k = np.arange(1, HEAT_DIM + 1, dtype=float)
    cfg = TruncationConfig(
        n=HEAT_DIM,
        m=HEAT_DIM,
        e_weights=1.0 / k**2,
        h_weights=np.ones(HEAT_DIM),
        embed_constant=1.0,
    )
    return ModelSpec(
        cfg=cfg,
        sg=Semigroup.diagonal(-HEAT_SPECTRUM_SCALE * (k * np.pi) ** 2),
        drift=TanhField(HEAT_DIM, amplitude=0.5, offset=0.0, gain=1.0),
        diffusion=CoordinateTanhDiffusion(HEAT_DIM, amplitude=0.3, offset=1.0, gain=0.5),
        initial_x=0.5 / k,
        name="heat_mult",
    )


def _hypo3() -> ModelSpec:
    chain = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    return ModelSpec(
        cfg=TruncationConfig.unit(3, 1),
        sg=Semigroup.diagonal(np.zeros(3)),
        drift=LinearField(chain),
        diffusion=ConstantDiffusion([[1.0], [0.0], [0.0]]),
        initial_x=np.zeros(3),
        name="hypo3",
    )


def _degenerate2() -> ModelSpec:
    return ModelSpec(
        cfg=TruncationConfig.unit(2, 1),
        sg=Semigroup.diagonal(np.zeros(2)),
        drift=LinearField(np.zeros((2, 2))),
        diffusion=ConstantDiffusion([[1.0], [0.0]]),
        initial_x=np.array([0.0, 1.0]),
        name="degenerate2",
    )


def _linear_gauss() -> ModelSpec:
    return ModelSpec(
        cfg=TruncationConfig.unit(4, 4),
        sg=Semigroup.diagonal(LINEAR_GAUSS_SPECTRUM),
        drift=LinearField(LINEAR_GAUSS_DRIFT),
        diffusion=ConstantDiffusion(LINEAR_GAUSS_DIFFUSION),
        initial_x=np.array(LINEAR_GAUSS_INITIAL),
        name="linear_gauss",
    )


_ZOO: dict[str, Callable[[], ModelSpec]] = {
    "heat_mult": _heat_mult,
    "hypo3": _hypo3,
    "degenerate2": _degenerate2,
    "linear_gauss": _linear_gauss,
}


def available_models() -> list[str]:
    """Nombres del zoo."""
    return sorted(_ZOO)


def zoo(name: str) -> ModelSpec:
    """
    Devuelve el modelo del zoo con ese nombre.

    Raises:
        UnknownModelError: Si el nombre no existe.

    Example:
        >>> zoo("degenerate2").drift.eval(np.array([5.0, 7.0]))
        array([0., 0.])
    """
    try:
        builder = _ZOO[name]
    except KeyError:
        raise UnknownModelError(name, available_models()) from None
    model = builder()
    logger.debug("zoo_model_built", model=name, n=model.n, m=model.m)
    return model


def polynomial_model(
    *,
    name: str,
    n: int,
    m: int,
    drift: Sequence[Sequence[Monomial]],
    diffusion: Sequence[Sequence[Sequence[Monomial]]],
    initial_x: Sequence[float],
    spectrum: Sequence[float] | None = None,
    generator: Sequence[Sequence[float]] | None = None,
    e_weights: Sequence[float] | None = None,
    h_weights: Sequence[float] | None = None,
    embed_constant: float = 1.0,
) -> ModelSpec:
    """
    Modelo de usuario con campos polinomiales (grado <= 3).

    Args:
        name: Identificador.
        n: Dimensión de estado.
        m: Dimensión del ruido.
        drift: n componentes de α, cada una lista de (coeficiente, potencias).
        diffusion: m columnas σ_k, cada una con n componentes de monomios.
        initial_x: Condición inicial.
        spectrum: Espectro diagonal de A (excluyente con generator).
        generator: Matriz densa de A.
        e_weights: Pesos de E (por defecto 1).
        h_weights: Pesos de H (por defecto 1).
        embed_constant: Constante de inmersión.

    Raises:
        InvalidModelError: Definición inconsistente.
    """
    if (spectrum is None) == (generator is None):
        raise InvalidModelError("Definir exactamente uno de spectrum o generator")
    if len(diffusion) != m:
        raise InvalidModelError(f"Se esperaban {m} columnas de difusión, hay {len(diffusion)}")

    sg = Semigroup.diagonal(spectrum) if spectrum is not None else Semigroup.dense(generator)  # type: ignore[arg-type]
    cfg = TruncationConfig(
        n=n,
        m=m,
        e_weights=np.ones(n) if e_weights is None else np.asarray(e_weights, dtype=float),
        h_weights=np.ones(m) if h_weights is None else np.asarray(h_weights, dtype=float),
        embed_constant=embed_constant,
    )
    columns = [polynomial_field(n, column) for column in diffusion]
    return ModelSpec(
        cfg=cfg,
        sg=sg,
        drift=polynomial_field(n, drift),
        diffusion=DiffusionFamily(columns),
        initial_x=np.asarray(initial_x, dtype=float),
        name=name,
    )
