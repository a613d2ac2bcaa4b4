"""
Configuración centralizada del laboratorio.

Este módulo gestiona los parámetros de proceso usando Pydantic Settings,
proporcionando validación automática, tipado estático y valores por defecto
que permiten ejecutar el laboratorio sin archivo .env.

La configuración de cada experimento (modelo, malla, semillas, tolerancias)
no vive aquí: se carga desde el archivo JSON del experimento
(ver src/schemas/config.py).
"""

from pathlib import Path
from typing import Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Configuración global del proceso.

    Carga y valida variables de entorno desde .env.

    Attributes:
        ENVIRONMENT: Entorno de ejecución (afecta al formato de logs).
        LOG_LEVEL: Nivel de logging.
        LOG_FILE: Archivo de log opcional con rotación.
        OVERFLOW_CAP: Cota de |t·λ_k| para el semigrupo inverso.
        RANK_TOLERANCE: Tolerancia relativa por defecto del rango de Hörmander.
        FD_STEP: Paso de las diferencias finitas de respaldo.
        MAX_FD_NESTING: Niveles de diferencias finitas anidadas permitidos.
        BRACKET_EXPRESSION_CAP: Máximo de expresiones de corchetes generadas.
        MAX_BRACKET_DEPTH: Profundidad máxima de corchetes.
        MAX_WORKERS: Hilos por defecto para el pool de trayectorias.
        BLOWUP_FRACTION_LIMIT: Fracción máxima tolerada de trayectorias divergentes.
        ATOM_FRACTION: Fracción de muestras que define un átomo.
        ATOM_TOLERANCE: Tolerancia relativa (a la dispersión) del test de átomos.
        GAMMA_THRESHOLD: Umbral del autovalor mínimo mediano de γ_T.
        KDE_L1_THRESHOLD: Umbral de estabilidad L¹ del KDE.
        KDE_GRID_POINTS: Puntos de malla del KDE unidimensional.
        KDE_GRID_POINTS_2D: Puntos por eje del KDE bidimensional.
    """

    # ==================== APLICACIÓN ====================
    ENVIRONMENT: Literal["development", "production", "test"] = Field(
        default="development",
        description="Entorno de ejecución (afecta al formato de logs)",
    )

    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field(
        default="INFO",
        description="Nivel de verbosidad de logs",
    )

    LOG_FILE: Path | None = Field(
        default=None,
        description="Archivo JSON de logs con rotación (None = solo stderr)",
    )

    # ==================== NUMÉRICA ====================
    OVERFLOW_CAP: float = Field(
        default=40.0,
        gt=0.0,
        le=700.0,
        description="Cota de max|t·λ_k| para exp(-tA); e^40 ≈ 2.4e17 sigue en rango double",
    )

    RANK_TOLERANCE: float = Field(
        default=1e-8,
        gt=0.0,
        lt=1.0,
        description="Tolerancia relativa al mayor valor singular para el rango",
    )

    FD_STEP: float = Field(
        default=1e-4,
        gt=0.0,
        le=1e-1,
        description="Paso de diferencias finitas (con extrapolación de Richardson)",
    )

    MAX_FD_NESTING: int = Field(
        default=2,
        ge=1,
        le=4,
        description="Niveles máximos de diferencias finitas anidadas",
    )

    BRACKET_EXPRESSION_CAP: int = Field(
        default=500,
        ge=1,
        le=100_000,
        description="Máximo de expresiones generadas para el test de Hörmander",
    )

    MAX_BRACKET_DEPTH: int = Field(
        default=3,
        ge=0,
        le=6,
        description="Profundidad máxima de corchetes anidados",
    )

    # ==================== MONTE CARLO ====================
    MAX_WORKERS: int = Field(
        default=1,
        ge=1,
        le=64,
        description="Hilos del pool de trayectorias (1 = secuencial)",
    )

    BLOWUP_FRACTION_LIMIT: float = Field(
        default=0.01,
        ge=0.0,
        le=1.0,
        description="Fracción de trayectorias divergentes a partir de la cual se aborta",
    )

    ATOM_FRACTION: float = Field(
        default=0.05,
        gt=0.0,
        le=1.0,
        description="Fracción de muestras en un mismo valor que se considera átomo",
    )

    ATOM_TOLERANCE: float = Field(
        default=1e-9,
        ge=0.0,
        description="Radio del test de átomos, relativo a la dispersión de la muestra",
    )

    GAMMA_THRESHOLD: float = Field(
        default=1e-6,
        gt=0.0,
        description="Umbral para declarar γ_T no degenerada (mediana del autovalor mínimo)",
    )

    KDE_L1_THRESHOLD: float = Field(
        default=0.1,
        gt=0.0,
        description="Discrepancia L¹ máxima entre KDE con h y h/2 para declarar estabilidad",
    )

    KDE_GRID_POINTS: int = Field(
        default=1024,
        ge=16,
        le=1_000_000,
        description="Puntos de malla para KDE en una dimensión",
    )

    KDE_GRID_POINTS_2D: int = Field(
        default=128,
        ge=8,
        le=2048,
        description="Puntos por eje para KDE en dos dimensiones",
    )

    # ==================== CONFIGURACIÓN DE PYDANTIC ====================
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # ==================== VALIDADORES CUSTOM ====================
    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalize_log_level(cls, value: str) -> str:
        """
        Acepta niveles en minúsculas desde el entorno.

        Args:
            value: Nivel tal como llega del entorno.

        Returns:
            Nivel en mayúsculas.
        """
        if isinstance(value, str):
            return value.upper()
        return value

    # ==================== PROPIEDADES DERIVADAS ====================
    @property
    def is_production(self) -> bool:
        """True si ENVIRONMENT es 'production'."""
        return self.ENVIRONMENT == "production"

    @property
    def is_development(self) -> bool:
        """True si ENVIRONMENT es 'development'."""
        return self.ENVIRONMENT == "development"


# ==================== INSTANCIA GLOBAL (SINGLETON) ====================
settings = Settings()
