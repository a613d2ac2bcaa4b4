"""
Trayectorias brownianas, soluciones y paquetes de flujos sobre la malla.

Todos los arrays se congelan (write=False) al construir: los resultados de
una trayectoria se comparten entre hilos y etapas sin copias defensivas.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from src.core.exceptions import DimensionMismatchError
from src.models.model_spec import ModelSpec
from src.models.spaces import TimeGrid


def _freeze(array: NDArray[np.float64] | None) -> NDArray[np.float64] | None:
    if array is not None:
        array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """
    Incrementos ΔW_j ~ N(0, dt·I_m) sobre una malla.

    Attributes:
        grid: Malla temporal.
        increments: Matriz N_t × m.
        seed: Semilla maestra.
        stream_id: Índice de la trayectoria (flujo independiente).
    """

    grid: TimeGrid
    increments: NDArray[np.float64]
    seed: int
    stream_id: int

    def __post_init__(self) -> None:
        if self.increments.ndim != 2 or self.increments.shape[0] != self.grid.steps:
            raise DimensionMismatchError(
                "increments", (self.grid.steps, -1), tuple(self.increments.shape)
            )
        _freeze(self.increments)

    @property
    def m(self) -> int:
        return int(self.increments.shape[1])

    def values(self) -> NDArray[np.float64]:
        """W en cada nodo, (N_t+1) × m, con W_0 = 0."""
        return np.vstack([np.zeros((1, self.m)), np.cumsum(self.increments, axis=0)])


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """
    Solución mild X en los nodos de la malla.

    Attributes:
        states: Matriz (N_t+1) × n.
        model: Modelo resuelto.
        path: Trayectoria browniana usada.
    """

    states: NDArray[np.float64]
    model: ModelSpec
    path: BrownianPath

    def __post_init__(self) -> None:
        _freeze(self.states)

    @property
    def terminal(self) -> NDArray[np.float64]:
        return self.states[-1]


class Formulation(str, Enum):
    """Formulación del inverso a derecha Z."""

    CONJUGATED = "conjugated"
    DIRECT = "direct"


@dataclass(frozen=True, eq=False)
class FlowBundle:
    """
    Flujos matriciales n×n en cada nodo (arrays (N_t+1) × n × n).

    Attributes:
        Y: Primera variación.
        V: Y_t − exp(tA).
        P: Flujo conjugado con Y_t = exp(tA)·P_t (None en formulación directa).
        R: Flujo conjugado con Z_t = R_t·exp(−tA).
        Z: Inverso a derecha de Y.
        formulation: Formulación usada para Z (None si solo hay parte Y).
    """

    Y: NDArray[np.float64]
    V: NDArray[np.float64]
    P: NDArray[np.float64] | None = None
    R: NDArray[np.float64] | None = None
    Z: NDArray[np.float64] | None = None
    formulation: Formulation | None = None

    def __post_init__(self) -> None:
        for array in (self.Y, self.V, self.P, self.R, self.Z):
            _freeze(array)

    @property
    def is_complete(self) -> bool:
        return self.Z is not None


class MalliavinRoute(str, Enum):
    """Vía de cálculo de D_rX_t."""

    SDE = "sde"
    PRODUCT = "product"


@dataclass(frozen=True, eq=False)
class MalliavinBundle:
    """
    D_rX_t para un r fijo y todos los nodos t.

    Attributes:
        r_index: Índice de r en la malla.
        D: Array (N_t+1) × n × m; ceros para t < r.
        route: Vía de cálculo.
    """

    r_index: int
    D: NDArray[np.float64]
    route: MalliavinRoute

    def __post_init__(self) -> None:
        _freeze(self.D)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """
    Muestras de ξ_T = F·X_T.

    Attributes:
        samples: Matriz N × k.
        master_seed: Semilla maestra.
        model_name: Nombre del modelo.
        functional: Matriz F (k × n).
        blowups: Trayectorias excluidas por divergencia.
    """

    samples: NDArray[np.float64]
    master_seed: int
    model_name: str
    functional: NDArray[np.float64]
    blowups: int = 0

    def __post_init__(self) -> None:
        _freeze(self.samples)
        _freeze(self.functional)

    @property
    def size(self) -> int:
        return int(self.samples.shape[0])

    @property
    def k(self) -> int:
        return int(self.samples.shape[1])
