"""
Excepciones base del laboratorio.

Cada servicio declara su propia jerarquía derivando de LabError; la CLI
captura LabError para producir reportes de error legibles por máquina.
"""


class LabError(Exception):
    """
    Excepción base para todos los errores del laboratorio.

    Útil para capturar cualquier error de dominio con un solo except.
    """

    pass


class DimensionMismatchError(LabError):
    """
    Se lanza cuando un vector o matriz no tiene la dimensión esperada.

    Uso típico:
        if v.shape != (n,):
            raise DimensionMismatchError("v", (n,), v.shape)
    """

    def __init__(self, what: str, expected: tuple[int, ...], actual: tuple[int, ...]):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: se esperaba forma {expected}, se recibió {actual}")


class NonFiniteInputError(LabError):
    """Se lanza cuando una entrada contiene NaN o infinitos."""

    def __init__(self, what: str):
        self.what = what
        super().__init__(f"{what} contiene valores no finitos")


class InvalidArgumentError(LabError, ValueError):
    """
    Argumento fuera de su dominio: tiempo negativo, índice fuera de la malla,
    formulación o variante desconocida.

    Deriva también de ValueError para los llamadores que ya lo capturan.
    """

    pass
