"""
Campos vectoriales con derivadas y familias de difusión.

Un VectorField expone eval, jacobian y hessian_action. Los campos del zoo
(constantes, lineales, tanh por coordenada) tienen derivadas analíticas y una
representación simbólica en sympy; los campos polinomiales definidos por el
usuario se construyen directamente como SymbolicField; CallableField envuelve
funciones arbitrarias y recurre a diferencias finitas de Richardson.

Cada campo declara fd_levels = (eval, jacobian, hessian): cuántas capas de
diferencias finitas anidadas necesita cada derivada. Pedir una derivada con
más capas que settings.MAX_FD_NESTING lanza DerivativeOrderError.
"""

from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence
from functools import cached_property, lru_cache

import numpy as np
import sympy as sp
from numpy.typing import NDArray

from src.core.config import settings
from src.core.exceptions import DimensionMismatchError, LabError
from src.utils.numdiff import richardson_derivative, richardson_jacobian

# ==================== EXCEPCIONES PERSONALIZADAS ====================


class InvalidModelError(LabError):
    """Definición de campo o modelo inconsistente."""

    pass


class DerivativeOrderError(LabError):
    """
    Se agotó la profundidad de diferencias finitas anidadas.

    Attributes:
        required: Capas de diferencias finitas que harían falta.
        allowed: Capas permitidas por configuración.
    """

    def __init__(self, required: int, allowed: int):
        self.required = required
        self.allowed = allowed
        super().__init__(
            f"La derivada pedida requiere {required} niveles de diferencias finitas "
            f"anidadas y el máximo es {allowed}; reducir la profundidad de corchetes"
        )


# ==================== SÍMBOLOS ====================


@lru_cache(maxsize=32)
def state_symbols(n: int) -> tuple[sp.Symbol, ...]:
    """Símbolos x0…x{n-1} compartidos por todos los campos de dimensión n."""
    return tuple(sp.symbols(f"x0:{n}", real=True))


def _check_fd_level(level: int) -> None:
    if level > settings.MAX_FD_NESTING:
        raise DerivativeOrderError(required=level, allowed=settings.MAX_FD_NESTING)


# ==================== CAMPO BASE ====================


class VectorField(ABC):
    """
    Campo vectorial V: R^n → R^n con derivadas de orden 1 y 2.

    Attributes:
        dim: Dimensión n.
        differentiability_order: Orden de derivación garantizado (>= 2).
        fd_levels: Capas de diferencias finitas de (eval, jacobian, hessian).
    """

    dim: int
    differentiability_order: int = 2
    fd_levels: tuple[int, int, int] = (0, 0, 0)

    @abstractmethod
    def eval(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """V(x)."""

    @abstractmethod
    def jacobian(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """V'(x) como matriz n×n."""

    @abstractmethod
    def hessian_action(
        self, x: NDArray[np.float64], u: NDArray[np.float64], v: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        """V''(x)(u, v)."""

    def as_symbolic(self) -> "SymbolicField | None":
        """Representación sympy exacta, si existe."""
        return None

    def __call__(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.eval(x)


# ==================== CAMPOS ANALÍTICOS DEL ZOO ====================


class ConstantField(VectorField):
    """V(x) = c."""

    def __init__(self, value: Sequence[float] | NDArray[np.float64]):
        self.value = np.array(value, dtype=float)
        self.value.setflags(write=False)
        self.dim = self.value.shape[0]
        self._zeros = np.zeros((self.dim, self.dim))
        self._zeros.setflags(write=False)

    def eval(self, x):
        return self.value.copy()

    def jacobian(self, x):
        return self._zeros

    def hessian_action(self, x, u, v):
        return np.zeros(self.dim)

    def as_symbolic(self) -> "SymbolicField":
        return SymbolicField(sp.Matrix(self.value.tolist()), state_symbols(self.dim))


class LinearField(VectorField):
    """V(x) = M·x + b."""

    def __init__(
        self,
        matrix: Sequence[Sequence[float]] | NDArray[np.float64],
        offset: Sequence[float] | NDArray[np.float64] | None = None,
    ):
        self.matrix = np.array(matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise DimensionMismatchError(
                "matrix", (self.matrix.shape[0], self.matrix.shape[0]), self.matrix.shape
            )
        self.matrix.setflags(write=False)
        self.dim = self.matrix.shape[0]
        self.offset = np.zeros(self.dim) if offset is None else np.array(offset, dtype=float)
        self.offset.setflags(write=False)

    def eval(self, x):
        return self.matrix @ x + self.offset

    def jacobian(self, x):
        return self.matrix

    def hessian_action(self, x, u, v):
        return np.zeros(self.dim)

    def as_symbolic(self) -> "SymbolicField":
        symbols = state_symbols(self.dim)
        expr = sp.Matrix(self.matrix.tolist()) * sp.Matrix(symbols) + sp.Matrix(self.offset.tolist())
        return SymbolicField(expr, symbols)


class TanhField(VectorField):
    """
    Campo saturante por coordenada.

    V(x)_i = amplitude·(offset + gain·tanh(x_i)) para i en coordinates y 0 en
    el resto. Con coordinates=None actúa sobre todas las coordenadas.

    Example:
        >>> drift = TanhField(8, amplitude=0.5, offset=0.0, gain=1.0)
        >>> column = TanhField(8, amplitude=0.3, offset=1.0, gain=0.5, coordinates=(2,))
    """

    def __init__(
        self,
        dim: int,
        amplitude: float,
        offset: float,
        gain: float,
        coordinates: Sequence[int] | None = None,
    ):
        self.dim = dim
        self.amplitude = float(amplitude)
        self.offset = float(offset)
        self.gain = float(gain)
        self.coordinates = tuple(range(dim)) if coordinates is None else tuple(coordinates)
        self._mask = np.zeros(dim, dtype=bool)
        self._mask[list(self.coordinates)] = True

    def values(self, tanh_x: NDArray[np.float64]) -> NDArray[np.float64]:
        """amplitude·(offset + gain·tanh(x)) en todas las coordenadas."""
        return self.amplitude * (self.offset + self.gain * tanh_x)

    def slopes(self, tanh_x: NDArray[np.float64]) -> NDArray[np.float64]:
        """Derivada amplitude·gain·sech²(x) en todas las coordenadas."""
        return self.amplitude * self.gain * (1.0 - tanh_x * tanh_x)

    def eval(self, x):
        out = np.zeros(self.dim)
        out[self._mask] = self.values(np.tanh(x))[self._mask]
        return out

    def jacobian(self, x):
        diagonal = np.where(self._mask, self.slopes(np.tanh(x)), 0.0)
        return np.diag(diagonal)

    def hessian_action(self, x, u, v):
        t = np.tanh(x)
        curvature = -2.0 * self.amplitude * self.gain * t * (1.0 - t * t)
        return np.where(self._mask, curvature * u * v, 0.0)

    def as_symbolic(self) -> "SymbolicField":
        symbols = state_symbols(self.dim)
        entries = [
            self.amplitude * (self.offset + self.gain * sp.tanh(symbols[i])) if self._mask[i] else 0
            for i in range(self.dim)
        ]
        return SymbolicField(sp.Matrix(entries), symbols)


# ==================== CAMPOS SIMBÓLICOS ====================


class SymbolicField(VectorField):
    """
    Campo definido por una expresión sympy n×1.

    Jacobiano y hessiano se derivan simbólicamente y se compilan con
    sympy.lambdify a funciones numpy la primera vez que se usan.
    """

    def __init__(self, expr: sp.Matrix, symbols: Sequence[sp.Symbol]):
        self.symbols = tuple(symbols)
        self.dim = len(self.symbols)
        self.expr = sp.Matrix(expr).reshape(self.dim, 1)

    @cached_property
    def jacobian_expr(self) -> sp.Matrix:
        return self.expr.jacobian(self.symbols)

    @cached_property
    def _eval_fn(self) -> Callable[..., object]:
        return sp.lambdify(self.symbols, self.expr, modules="numpy")

    @cached_property
    def _jacobian_fn(self) -> Callable[..., object]:
        return sp.lambdify(self.symbols, self.jacobian_expr, modules="numpy")

    @cached_property
    def _hessian_fn(self) -> Callable[..., object]:
        hessians = [sp.hessian(self.expr[i], self.symbols) for i in range(self.dim)]
        return sp.lambdify(self.symbols, hessians, modules="numpy")

    def eval(self, x):
        return np.asarray(self._eval_fn(*x), dtype=float).reshape(self.dim)

    def jacobian(self, x):
        return np.asarray(self._jacobian_fn(*x), dtype=float).reshape(self.dim, self.dim)

    def hessian_tensor(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """Tensor H[i, j, k] = ∂²V_i / ∂x_j ∂x_k."""
        return np.asarray(self._hessian_fn(*x), dtype=float).reshape(self.dim, self.dim, self.dim)

    def hessian_action(self, x, u, v):
        return np.einsum("ijk,j,k->i", self.hessian_tensor(x), u, v)

    def as_symbolic(self) -> "SymbolicField":
        return self


def polynomial_field(dim: int, components: Sequence[Sequence[tuple[float, Sequence[int]]]]) -> SymbolicField:
    """
    Construye un campo polinomial de grado <= 3 a partir de monomios.

    Args:
        dim: Dimensión n.
        components: Para cada componente, lista de (coeficiente, potencias) con
            potencias de longitud n.

    Returns:
        SymbolicField con el polinomio.

    Raises:
        InvalidModelError: Dimensiones inconsistentes o grado mayor que 3.

    Example:
        >>> # V(x) = (x1², -x0)
        >>> polynomial_field(2, [[(1.0, (0, 2))], [(-1.0, (1, 0))]])
    """
    if len(components) != dim:
        raise InvalidModelError(f"Se esperaban {dim} componentes, hay {len(components)}")

    symbols = state_symbols(dim)
    entries = []
    for index, monomials in enumerate(components):
        total = sp.Integer(0)
        for coeff, powers in monomials:
            if len(powers) != dim:
                raise InvalidModelError(
                    f"Componente {index}: potencias de longitud {len(powers)}, se esperaba {dim}"
                )
            if any(p < 0 for p in powers) or sum(powers) > 3:
                raise InvalidModelError(f"Componente {index}: grado máximo 3 con potencias >= 0")
            term = sp.Float(coeff)
            for symbol, power in zip(symbols, powers, strict=True):
                term *= symbol**power
            total += term
        entries.append(total)
    return SymbolicField(sp.Matrix(entries), symbols)


# ==================== CAMPOS NUMÉRICOS (RESPALDO) ====================


class CallableField(VectorField):
    """
    Campo definido por funciones de Python.

    Las derivadas no suministradas se aproximan con diferencias finitas de
    Richardson (paso settings.FD_STEP).
    """

    def __init__(
        self,
        dim: int,
        fn: Callable[[NDArray[np.float64]], NDArray[np.float64]],
        jacobian_fn: Callable[[NDArray[np.float64]], NDArray[np.float64]] | None = None,
        hessian_fn: Callable[..., NDArray[np.float64]] | None = None,
        step: float | None = None,
    ):
        self.dim = dim
        self._fn = fn
        self._jacobian_fn = jacobian_fn
        self._hessian_fn = hessian_fn
        self.step = settings.FD_STEP if step is None else step
        jac_level = 0 if jacobian_fn is not None else 1
        hess_level = 0 if hessian_fn is not None else jac_level + 1
        self.fd_levels = (0, jac_level, hess_level)

    def eval(self, x):
        return np.asarray(self._fn(x), dtype=float)

    def jacobian(self, x):
        if self._jacobian_fn is not None:
            return np.asarray(self._jacobian_fn(x), dtype=float)
        _check_fd_level(self.fd_levels[1])
        return richardson_jacobian(self.eval, x, self.step)

    def hessian_action(self, x, u, v):
        if self._hessian_fn is not None:
            return np.asarray(self._hessian_fn(x, u, v), dtype=float)
        _check_fd_level(self.fd_levels[2])
        return richardson_derivative(lambda y: self.jacobian(y) @ v, x, u, self.step)


class DerivedField(VectorField):
    """
    Campo numérico construido a partir de otros campos.

    Subclases implementan eval; jacobiano y hessiano se obtienen por
    diferencias finitas anidadas sobre eval, contabilizadas en fd_levels.
    """

    def __init__(self, dim: int, eval_level: int, step: float | None = None):
        self.dim = dim
        self.step = settings.FD_STEP if step is None else step
        self.fd_levels = (eval_level, eval_level + 1, eval_level + 2)
        _check_fd_level(eval_level)

    def jacobian(self, x):
        _check_fd_level(self.fd_levels[1])
        return richardson_jacobian(self.eval, x, self.step)

    def hessian_action(self, x, u, v):
        _check_fd_level(self.fd_levels[2])
        return richardson_derivative(lambda y: self.jacobian(y) @ v, x, u, self.step)


# ==================== FAMILIAS DE DIFUSIÓN ====================


class DiffusionFamily:
    """
    Familia {σ_1, …, σ_m}; σ(x) es la matriz n×m con columna k igual a σ_k(x).

    Attributes:
        columns: Campos σ_k.
        n: Dimensión de estado.
        m: Dimensión del ruido.
    """

    def __init__(self, columns: Sequence[VectorField]):
        if not columns:
            raise InvalidModelError("La familia de difusión necesita al menos una columna")
        dims = {column.dim for column in columns}
        if len(dims) != 1:
            raise InvalidModelError(f"Columnas con dimensiones distintas: {sorted(dims)}")
        self.columns: tuple[VectorField, ...] = tuple(columns)
        self.n = dims.pop()
        self.m = len(self.columns)

    @property
    def is_constant(self) -> bool:
        return all(isinstance(column, ConstantField) for column in self.columns)

    def assemble(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """σ(x) como matriz n×m."""
        return np.column_stack([column.eval(x) for column in self.columns])

    def jacobians(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """Tensor m×n×n con σ'_k(x) en la posición k."""
        return np.stack([column.jacobian(x) for column in self.columns])


class ConstantDiffusion(DiffusionFamily):
    """σ(x) = S constante (n×m)."""

    def __init__(self, matrix: Sequence[Sequence[float]] | NDArray[np.float64]):
        self.matrix = np.array(matrix, dtype=float)
        if self.matrix.ndim != 2:
            raise InvalidModelError("La matriz de difusión debe ser n×m")
        self.matrix.setflags(write=False)
        super().__init__([ConstantField(self.matrix[:, k]) for k in range(self.matrix.shape[1])])
        self._zeros = np.zeros((self.m, self.n, self.n))
        self._zeros.setflags(write=False)

    def assemble(self, x):
        return np.array(self.matrix)

    def jacobians(self, x):
        return self._zeros


class CoordinateTanhDiffusion(DiffusionFamily):
    """
    σ_k(x) = amplitude·(offset + gain·tanh(x_k))·e_k, con m = n.

    Evaluación vectorizada; columna a columna coincide exactamente con los
    TanhField que la componen.
    """

    def __init__(self, dim: int, amplitude: float, offset: float, gain: float):
        super().__init__(
            [TanhField(dim, amplitude, offset, gain, coordinates=(k,)) for k in range(dim)]
        )
        self._template = TanhField(dim, amplitude, offset, gain)
        self._diag = np.arange(dim)

    def assemble(self, x):
        return np.diag(self._template.values(np.tanh(x)))

    def jacobians(self, x):
        out = np.zeros((self.m, self.n, self.n))
        out[self._diag, self._diag, self._diag] = self._template.slopes(np.tanh(x))
        return out
