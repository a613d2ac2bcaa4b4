"""
Schemas de Pydantic del laboratorio.

Dominios:
- reports: reportes serializables de cada comando
- config: configuración de experimentos (JSON con comentarios)
"""

from src.schemas.reports import (
    CommandReport,
    CovarianceReport,
    DensityReport,
    ErrorReport,
    GateResult,
    ReportHeader,
    SpanReport,
    SpanVector,
)
from src.schemas.config import ConfigError, ExperimentConfig, load_config, parse_config

__all__ = [
    "ReportHeader",
    "SpanVector",
    "SpanReport",
    "CovarianceReport",
    "DensityReport",
    "GateResult",
    "CommandReport",
    "ErrorReport",
    "ExperimentConfig",
    "ConfigError",
    "load_config",
    "parse_config",
]
