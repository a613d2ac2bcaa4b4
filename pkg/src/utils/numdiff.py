"""
Diferencias finitas centrales con extrapolación de Richardson.

Respaldo para campos sin derivadas analíticas: la diferencia central de paso
h tiene error O(h²); combinando h y h/2 como (4·D(h/2) − D(h))/3 se cancela
el término principal y el error queda en O(h⁴).
"""

from collections.abc import Callable

import numpy as np
from numpy.typing import NDArray

ArrayFn = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def central_difference(
    fn: ArrayFn, x: NDArray[np.float64], direction: NDArray[np.float64], step: float
) -> NDArray[np.float64]:
    """(f(x + h·d) − f(x − h·d)) / 2h."""
    return (fn(x + step * direction) - fn(x - step * direction)) / (2.0 * step)


def richardson_derivative(
    fn: ArrayFn, x: NDArray[np.float64], direction: NDArray[np.float64], step: float
) -> NDArray[np.float64]:
    """
    Derivada direccional de fn en x a lo largo de direction.

    Args:
        fn: Función vectorial (o matricial) de x.
        x: Punto de evaluación.
        direction: Dirección de derivación.
        step: Paso base h.

    Returns:
        Estimación O(h⁴) de f'(x)·direction, con la forma de fn(x).
    """
    coarse = central_difference(fn, x, direction, step)
    fine = central_difference(fn, x, direction, step / 2.0)
    return (4.0 * fine - coarse) / 3.0


def richardson_jacobian(fn: ArrayFn, x: NDArray[np.float64], step: float) -> NDArray[np.float64]:
    """
    Jacobiano n×n de fn en x, columna a columna.

    Example:
        >>> richardson_jacobian(lambda v: v**2, np.array([1.0, 2.0]), 1e-4)
        array([[2., 0.],
               [0., 4.]])
    """
    n = x.shape[0]
    identity = np.eye(n)
    columns = [richardson_derivative(fn, x, identity[j], step) for j in range(n)]
    return np.stack(columns, axis=-1)
