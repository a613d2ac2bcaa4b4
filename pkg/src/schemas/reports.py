"""
Schemas Pydantic de los reportes del laboratorio.

Define los modelos serializables a JSON:
- SpanReport: rango de Hörmander en un punto
- CovarianceReport: C_t, γ_t y su menor autovalor
- DensityReport: veredicto de densidad (KDE, átomos, espectro de γ)
- CommandReport / ErrorReport: envoltorio común de cada comando de la CLI

Los arrays de numpy se aceptan en la construcción y se guardan como listas,
de modo que model_dump() es directamente serializable.
"""

from typing import Annotated, Any, Literal

import numpy as np
from pydantic import BaseModel, BeforeValidator, Field


def _to_list(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


Vector = Annotated[list[float], BeforeValidator(_to_list)]
Matrix = Annotated[list[list[float]], BeforeValidator(_to_list)]
Real = Annotated[float, BeforeValidator(_to_list)]


class ReportHeader(BaseModel):
    """Parámetros de truncación presentes en todo reporte."""

    model: str = Field(..., description="Nombre del modelo")
    n: int = Field(..., ge=1, description="Dimensión de estado truncada")
    m: int = Field(..., ge=1, description="Dimensión del ruido truncada")
    dt: float = Field(..., gt=0, description="Paso de malla")
    T: float = Field(..., gt=0, description="Horizonte")
    steps: int = Field(..., ge=1, description="Número de pasos")


# ==================== HÖRMANDER ====================


class SpanVector(BaseModel):
    """Un corchete evaluado en el punto."""

    expression: str = Field(..., description="Corchete en notación '[s0,[s1,s2]]'")
    value: Vector = Field(..., description="Vector evaluado")


class SpanReport(BaseModel):
    """
    Rango numérico del span de los corchetes en un punto.

    Example:
        >>> report.rank, report.statement
        (3, 'full rank at truncation n=3')
    """

    point: Vector = Field(..., description="Punto de evaluación x")
    vectors: list[SpanVector] = Field(..., description="Corchetes evaluados")
    singular_values: Vector = Field(..., description="Valores singulares en orden descendente")
    rank: int = Field(..., ge=0, description="Rango a tolerancia relativa")
    tolerance: float = Field(..., gt=0, lt=1, description="Umbral relativo al mayor valor singular")
    n: int = Field(..., ge=1, description="Dimensión de truncación")
    depth: int = Field(..., ge=0, description="Profundidad de corchetes")
    variant: str = Field(default="corrected", description="Familia de generadores")

    @property
    def full_rank(self) -> bool:
        return self.rank == self.n

    @property
    def statement(self) -> str:
        if self.full_rank:
            return f"full rank at truncation n={self.n}"
        return f"rank {self.rank} < n={self.n} at truncation"


# ==================== MALLIAVIN ====================


class CovarianceReport(BaseModel):
    """C_t, γ_t = (F·Y_t)C_t(F·Y_t)ᵀ y su menor autovalor."""

    F: Matrix = Field(..., description="Funcional lineal k×n")
    C: Matrix = Field(..., description="Operador de covarianza n×n")
    gamma: Matrix = Field(..., description="Matriz de Malliavin k×k")
    min_eigenvalue: Real = Field(..., description="Menor autovalor de gamma")
    quadrature: str = Field(default="left_riemann", description="Regla de cuadratura")
    t_index: int = Field(..., ge=0, description="Nodo de evaluación (por defecto T)")


# ==================== DENSIDAD ====================


class DensityReport(BaseModel):
    """
    Veredicto de densidad para ξ_T = F·X_T.

    expect_density resume el lado teórico (rango completo y γ_T ≻ 0);
    observed_density el empírico (sin átomos y KDE estable).
    """

    n_samples: int = Field(..., ge=0, description="Muestras válidas")
    blowups: int = Field(default=0, ge=0, description="Trayectorias excluidas")
    k: int = Field(..., ge=1, description="Dimensión de ξ")
    bandwidths: list[Vector] = Field(..., description="Escalera h0, h0/2, h0/4 por coordenada")
    l1_discrepancy: Real = Field(..., ge=0, description="L¹ entre KDE con h0 y h0/2")
    l1_ladder: Vector = Field(default_factory=list, description="L¹ entre escalones consecutivos")
    normalization: Vector = Field(default_factory=list, description="Masa de cada KDE en la malla")
    marginal: bool = Field(default=False, description="KDE sobre marginales 1D (k > 2)")
    atom_flag: bool = Field(..., description="Algún valor con >= 5% de las muestras")
    atom_locations: list[Vector] = Field(default_factory=list, description="Ubicaciones de átomos")
    sample_mean: Vector = Field(default_factory=list, description="Media muestral")
    covariance_eigenvalues: Vector = Field(default_factory=list, description="Autovalores de la covarianza muestral")
    rank: int | None = Field(default=None, description="Rango de Hörmander en initial_x")
    gamma_spectrum_summary: dict[str, float] = Field(
        default_factory=dict, description="Cuantiles del menor autovalor de γ_T"
    )
    expect_density: bool | None = Field(default=None, description="rank = n ∧ mediana γ_T > umbral")
    observed_density: bool = Field(..., description="Sin átomos ∧ L¹ <= umbral")
    consistent: bool | None = Field(default=None, description="expect_density == observed_density")
    implication: str = Field(default="", description="Cadena de implicaciones legible")


# ==================== COMANDOS ====================


class GateResult(BaseModel):
    """Una compuerta de tolerancia."""

    name: str = Field(..., description="Identificador de la comprobación")
    value: Real = Field(..., description="Valor medido")
    threshold: Real = Field(..., description="Umbral configurado")
    passed: bool = Field(..., description="Si la comprobación pasó")


class CommandReport(BaseModel):
    """
    Reporte de un comando de la CLI.

    status es "passed" si todas las compuertas pasan y "failed" si alguna
    falla; failures lista sus nombres en el orden de evaluación.
    """

    command: str = Field(..., description="Subcomando ejecutado")
    status: Literal["passed", "failed"] = Field(..., description="Resultado global")
    header: ReportHeader
    gates: list[GateResult] = Field(default_factory=list)
    failures: list[str] = Field(default_factory=list)
    results: dict[str, Any] = Field(default_factory=dict, description="Resultados específicos")

    @property
    def exit_code(self) -> int:
        return 0 if self.status == "passed" else 1


class ErrorReport(BaseModel):
    """Error estructurado de un comando."""

    command: str
    status: Literal["error"] = "error"
    error_type: str = Field(..., description="Clase de la excepción")
    message: str = Field(..., description="Mensaje legible")
    details: dict[str, Any] = Field(default_factory=dict)
