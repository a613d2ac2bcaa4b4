"""
Operaciones sobre las truncaciones de E y H: acción del semigrupo, su
inversa y las normas ponderadas.

hs_norm es el sustituto en dimensión finita de la norma γ-radonificante:
una norma de Hilbert–Schmidt ponderada con hs_norm(M)² = Σ_k e_norm(M·e_k)²·h_k⁻².
"""

import numpy as np
from numpy.typing import NDArray

from src.core.exceptions import DimensionMismatchError, InvalidArgumentError, NonFiniteInputError
from src.models.spaces import Semigroup, SemigroupKindError, TruncationConfig


def _as_vector(v: NDArray[np.float64] | list[float], n: int, what: str) -> NDArray[np.float64]:
    array = np.asarray(v, dtype=float)
    if array.shape != (n,):
        raise DimensionMismatchError(what, (n,), array.shape)
    if not np.all(np.isfinite(array)):
        raise NonFiniteInputError(what)
    return array


def _check_time(t: float) -> None:
    if not np.isfinite(t):
        raise NonFiniteInputError("t")
    if t < 0:
        raise InvalidArgumentError(f"t debe ser >= 0 (t={t})")


# ==================== SEMIGRUPO ====================


def apply_semigroup(sg: Semigroup, t: float, v: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    exp(tA)·v.

    Args:
        sg: Semigrupo.
        t: Tiempo >= 0.
        v: Vector de dimensión n.

    Returns:
        exp(tA)v; en el tipo diagonal, exp(t·λ_k)·v_k componente a componente.

    Raises:
        DimensionMismatchError: Si v no tiene dimensión n.
        NonFiniteInputError: Si t o v no son finitos.

    Example:
        >>> sg = Semigroup.diagonal([-1.0])
        >>> apply_semigroup(sg, np.log(2.0), np.array([1.0]))
        array([0.5])
    """
    _check_time(t)
    vector = _as_vector(v, sg.n, "v")
    if t == 0.0:
        return vector.copy()
    if sg.is_diagonal:
        return sg.factors(t) * vector
    return sg.matrix(t) @ vector


def apply_inverse_semigroup(sg: Semigroup, t: float, v: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    exp(−tA)·v para el tipo diagonal.

    Raises:
        SemigroupKindError: Si el generador es denso.
        OverflowCapError: Si max_k |t·λ_k| > overflow_cap.
    """
    _check_time(t)
    vector = _as_vector(v, sg.n, "v")
    if not sg.is_diagonal:
        raise SemigroupKindError("apply_inverse_semigroup solo admite el tipo diagonal")
    sg.check_inverse_cap(t)
    if t == 0.0:
        return vector.copy()
    return sg.factors(-t) * vector


# ==================== NORMAS ====================


def e_norm(cfg: TruncationConfig, v: NDArray[np.float64]) -> float:
    """‖v‖_E = sqrt(Σ_i (w_i·v_i)²)."""
    vector = np.asarray(v, dtype=float)
    if vector.shape != (cfg.n,):
        raise DimensionMismatchError("v", (cfg.n,), vector.shape)
    return float(np.linalg.norm(cfg.e_weights * vector))


def h_norm(cfg: TruncationConfig, v: NDArray[np.float64]) -> float:
    """‖v‖_H = sqrt(Σ_k (h_k·v_k)²)."""
    vector = np.asarray(v, dtype=float)
    if vector.shape != (cfg.m,):
        raise DimensionMismatchError("v", (cfg.m,), vector.shape)
    return float(np.linalg.norm(cfg.h_weights * vector))


def hs_norm(cfg: TruncationConfig, M: NDArray[np.float64]) -> float:
    """
    Norma de Hilbert–Schmidt ponderada de M: H → E (n×m).

    Example:
        >>> hs_norm(TruncationConfig.unit(2, 2), np.eye(2))  # √2
        1.4142135623730951
    """
    matrix = np.asarray(M, dtype=float)
    if matrix.shape != (cfg.n, cfg.m):
        raise DimensionMismatchError("M", (cfg.n, cfg.m), matrix.shape)
    weighted = cfg.e_weights[:, None] * matrix / cfg.h_weights[None, :]
    return float(np.linalg.norm(weighted))


def hs_norms(cfg: TruncationConfig, stack: NDArray[np.float64]) -> NDArray[np.float64]:
    """hs_norm aplicada a una pila (..., n, m) de matrices."""
    weighted = cfg.e_weights[:, None] * stack / cfg.h_weights[None, :]
    return np.sqrt(np.sum(weighted * weighted, axis=(-2, -1)))


def op_norm(cfg: TruncationConfig, B: NDArray[np.float64]) -> float:
    """Norma de operador de B: E → E (n×n) respecto de ‖·‖_E."""
    matrix = np.asarray(B, dtype=float)
    if matrix.shape != (cfg.n, cfg.n):
        raise DimensionMismatchError("B", (cfg.n, cfg.n), matrix.shape)
    weighted = cfg.e_weights[:, None] * matrix / cfg.e_weights[None, :]
    return float(np.linalg.norm(weighted, ord=2))
