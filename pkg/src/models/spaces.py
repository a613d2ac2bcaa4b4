"""
Truncaciones finitas de los espacios E, H y del semigrupo e^{tA}.

Las coordenadas son coeficientes sobre los primeros n (resp. m) vectores de
base; la norma de E se modela con una norma euclídea ponderada y la de H con
otra, conservando la distinción entre ambos espacios.
"""

import threading
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from src.core.config import settings
from src.core.exceptions import DimensionMismatchError, LabError, NonFiniteInputError

# ==================== EXCEPCIONES PERSONALIZADAS ====================


class InvalidTruncationError(LabError):
    """Pesos o dimensiones de truncación inválidos."""

    pass


class SemigroupError(LabError):
    """Excepción base para errores del semigrupo."""

    pass


class SemigroupKindError(SemigroupError):
    """Operación no soportada por el tipo de generador (diagonal/denso)."""

    pass


class OverflowCapError(SemigroupError):
    """
    max_k |t·λ_k| supera overflow_cap al invertir el semigrupo.

    Indica que la formulación conjugada por e^{-sA} no es numéricamente
    válida para este modelo; el llamador debe usar la formulación directa.
    """

    def __init__(self, t: float, exponent: float, cap: float):
        self.operation = "apply_inverse_semigroup"
        self.t = t
        self.exponent = exponent
        self.cap = cap
        super().__init__(
            f"apply_inverse_semigroup: max|t·λ| = {exponent:.6g} supera overflow_cap = {cap:.6g} "
            f"en t = {t:.6g}; usar la formulación directa de Z"
        )


# ==================== TRUNCACIÓN ====================


def _frozen(values: NDArray[np.float64] | list[float], what: str) -> NDArray[np.float64]:
    array = np.array(values, dtype=float)
    if not np.all(np.isfinite(array)):
        raise NonFiniteInputError(what)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class TruncationConfig:
    """
    Truncación de Galerkin de E (dimensión n) y H (dimensión m).

    Attributes:
        n: Dimensión de estado.
        m: Dimensión del ruido.
        e_weights: Pesos de la norma de E (n valores > 0).
        h_weights: Pesos de la norma de H (m valores > 0).
        embed_constant: Constante c de la inmersión ‖·‖_E ≤ c‖·‖_H.
    """

    n: int
    m: int
    e_weights: NDArray[np.float64]
    h_weights: NDArray[np.float64]
    embed_constant: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 1:
            raise InvalidTruncationError(f"n y m deben ser >= 1 (n={self.n}, m={self.m})")

        e_weights = _frozen(self.e_weights, "e_weights")
        h_weights = _frozen(self.h_weights, "h_weights")
        if e_weights.shape != (self.n,):
            raise DimensionMismatchError("e_weights", (self.n,), e_weights.shape)
        if h_weights.shape != (self.m,):
            raise DimensionMismatchError("h_weights", (self.m,), h_weights.shape)
        if np.any(e_weights <= 0) or np.any(h_weights <= 0):
            raise InvalidTruncationError("Todos los pesos deben ser estrictamente positivos")
        if not self.embed_constant > 0:
            raise InvalidTruncationError("embed_constant debe ser positiva")

        # Inmersión continua H ↪ E en las coordenadas compartidas
        shared = min(self.n, self.m)
        if np.any(e_weights[:shared] > self.embed_constant * h_weights[:shared]):
            raise InvalidTruncationError(
                "e_weights[i] <= embed_constant·h_weights[i] no se cumple en coordenadas compartidas"
            )

        object.__setattr__(self, "e_weights", e_weights)
        object.__setattr__(self, "h_weights", h_weights)

    @classmethod
    def unit(cls, n: int, m: int) -> "TruncationConfig":
        """Truncación con todos los pesos iguales a 1."""
        return cls(n=n, m=m, e_weights=np.ones(n), h_weights=np.ones(m), embed_constant=1.0)


# ==================== MALLA TEMPORAL ====================


@dataclass(frozen=True)
class TimeGrid:
    """
    Malla uniforme t_j = j·dt sobre [0, T].

    Attributes:
        T: Horizonte (> 0).
        steps: Número de pasos N_t (>= 1).
    """

    T: float
    steps: int

    def __post_init__(self) -> None:
        if not (np.isfinite(self.T) and self.T > 0):
            raise InvalidTruncationError(f"T debe ser positivo y finito (T={self.T})")
        if self.steps < 1:
            raise InvalidTruncationError(f"steps debe ser >= 1 (steps={self.steps})")

    @property
    def dt(self) -> float:
        return self.T / self.steps

    @cached_property
    def nodes(self) -> NDArray[np.float64]:
        # linspace garantiza t_0 = 0 y t_N = T exactamente
        nodes = np.linspace(0.0, self.T, self.steps + 1)
        nodes.setflags(write=False)
        return nodes

    def coarsened(self, factor: int) -> "TimeGrid":
        """
        Malla con paso factor·dt sobre el mismo horizonte.

        Raises:
            InvalidTruncationError: Si factor no divide a steps.
        """
        if factor < 1 or self.steps % factor != 0:
            raise InvalidTruncationError(f"factor {factor} no divide steps={self.steps}")
        return TimeGrid(T=self.T, steps=self.steps // factor)


# ==================== SEMIGRUPO ====================


class SemigroupKind(str, Enum):
    """Representación del generador A."""

    DIAGONAL = "diagonal"
    DENSE = "dense"


@dataclass(frozen=True, eq=False)
class Semigroup:
    """
    Semigrupo e^{tA} con generador diagonal (espectro) o denso (matriz).

    Inmutable salvo por la caché de exponenciales, protegida por un lock para
    poder compartirse entre hilos del pool de trayectorias.

    Attributes:
        kind: Tipo de generador.
        spectrum: Autovalores λ_k <= 0 (solo diagonal).
        generator: Matriz n×n (solo denso).
        overflow_cap: Cota de max|t·λ_k| para la inversa.
    """

    kind: SemigroupKind
    spectrum: NDArray[np.float64] | None = None
    generator: NDArray[np.float64] | None = None
    overflow_cap: float = field(default_factory=lambda: settings.OVERFLOW_CAP)
    _cache: dict[float, NDArray[np.float64]] = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind is SemigroupKind.DIAGONAL:
            if self.spectrum is None:
                raise SemigroupError("Semigrupo diagonal requiere spectrum")
            spectrum = _frozen(np.ravel(self.spectrum), "spectrum")
            if np.any(spectrum > 0):
                raise SemigroupError("El espectro diagonal debe cumplir λ_k <= 0")
            object.__setattr__(self, "spectrum", spectrum)
        else:
            if self.generator is None:
                raise SemigroupError("Semigrupo denso requiere generator")
            generator = _frozen(self.generator, "generator")
            if generator.ndim != 2 or generator.shape[0] != generator.shape[1]:
                raise DimensionMismatchError(
                    "generator", (generator.shape[0], generator.shape[0]), generator.shape
                )
            object.__setattr__(self, "generator", generator)

    # ---------- constructores ----------

    @classmethod
    def diagonal(cls, spectrum: list[float] | NDArray[np.float64], overflow_cap: float | None = None):
        cap = settings.OVERFLOW_CAP if overflow_cap is None else overflow_cap
        return cls(kind=SemigroupKind.DIAGONAL, spectrum=np.asarray(spectrum), overflow_cap=cap)

    @classmethod
    def dense(cls, generator: list[list[float]] | NDArray[np.float64], overflow_cap: float | None = None):
        cap = settings.OVERFLOW_CAP if overflow_cap is None else overflow_cap
        return cls(kind=SemigroupKind.DENSE, generator=np.asarray(generator), overflow_cap=cap)

    # ---------- propiedades ----------

    @property
    def n(self) -> int:
        if self.kind is SemigroupKind.DIAGONAL:
            return int(self.spectrum.shape[0])  # type: ignore[union-attr]
        return int(self.generator.shape[0])  # type: ignore[union-attr]

    @property
    def is_diagonal(self) -> bool:
        return self.kind is SemigroupKind.DIAGONAL

    def generator_matrix(self) -> NDArray[np.float64]:
        """A como matriz n×n."""
        if self.is_diagonal:
            return np.diag(self.spectrum)
        return np.array(self.generator)

    def apply_generator(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """A·x."""
        if self.is_diagonal:
            return self.spectrum * x
        return self.generator @ x

    # ---------- exponenciales ----------

    def factors(self, t: float) -> NDArray[np.float64]:
        """exp(t·λ_k) para el tipo diagonal (t puede ser negativo)."""
        if not self.is_diagonal:
            raise SemigroupKindError("factors() solo existe para el tipo diagonal")
        return np.exp(t * self.spectrum)

    def matrix(self, t: float) -> NDArray[np.float64]:
        """
        exp(tA) como matriz n×n (t >= 0), con caché por valor de t.

        Para el tipo denso usa scipy.linalg.expm (scaling-and-squaring con Padé).
        """
        with self._lock:
            cached = self._cache.get(t)
        if cached is not None:
            return cached

        if t == 0.0:
            result = np.eye(self.n)
        elif self.is_diagonal:
            result = np.diag(np.exp(t * self.spectrum))
        else:
            result = expm(t * self.generator)
        result.setflags(write=False)

        with self._lock:
            self._cache.setdefault(t, result)
            return self._cache[t]

    def local_inverse(self, dt: float) -> NDArray[np.float64]:
        """
        exp(-dt·A) para un paso de malla (cualquier tipo).

        Es el factor de paso de la formulación directa de Z; no pasa por
        overflow_cap porque dt·|λ| es pequeño en cualquier malla razonable.
        """
        if self.is_diagonal:
            return np.diag(np.exp(-dt * self.spectrum))
        return expm(-dt * self.generator)

    def check_inverse_cap(self, t: float) -> None:
        """
        Verifica max_k |t·λ_k| <= overflow_cap.

        Raises:
            SemigroupKindError: Si el generador es denso.
            OverflowCapError: Si se excede la cota.
        """
        if not self.is_diagonal:
            raise SemigroupKindError("apply_inverse_semigroup solo admite el tipo diagonal")
        exponent = float(np.max(np.abs(t * self.spectrum))) if self.n else 0.0
        if exponent > self.overflow_cap:
            raise OverflowCapError(t=t, exponent=exponent, cap=self.overflow_cap)

    def conjugate(self, t: float, M: NDArray[np.float64]) -> NDArray[np.float64]:
        """
        exp(-tA)·M·exp(tA) para el tipo diagonal.

        Se calcula con el factor exp(t(λ_j − λ_i)) en lugar de multiplicar
        los dos exponenciales por separado.

        Raises:
            OverflowCapError: Si exp(-tA) excede overflow_cap.
        """
        self.check_inverse_cap(t)
        spectrum = self.spectrum
        return M * np.exp(t * (spectrum[None, :] - spectrum[:, None]))
