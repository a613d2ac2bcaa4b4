"""
Configuración centralizada del sistema de logging estructurado.

Este módulo implementa logging estructurado usando structlog para todo el
laboratorio. Proporciona:
- Formato consistente en todos los módulos (consola en desarrollo, JSON en producción)
- Identificador de ejecución para correlacionar eventos de un mismo comando
- Procesadores para enriquecer contexto (timestamp, módulo, nivel)
- Rotación automática del archivo de log cuando LOG_FILE está configurado

Los logs se emiten por stderr: stdout queda reservado para los reportes
JSON de la CLI (flag --json).

Example:
    >>> from src.core.logging_config import get_logger
    >>> logger = get_logger(__name__)
    >>> logger.warning("path_blowup", model="hypo3", stream_id=3, node=120)
"""

import logging
import logging.handlers
import sys
from pathlib import Path
from typing import Any

import numpy as np
import structlog
from structlog.types import EventDict, Processor

# ==================== CONFIGURACIÓN ====================

# Configuración de rotación
MAX_BYTES = 50 * 1024 * 1024  # 50MB
BACKUP_COUNT = 5


# ==================== PROCESADORES CUSTOM ====================


def add_app_context(logger: Any, method_name: str, event_dict: EventDict) -> EventDict:
    """
    Añade el nombre del módulo emisor a cada log.

    Args:
        logger: Logger de structlog.
        method_name: Método del logger (info, error, etc.).
        event_dict: Diccionario del evento a loggear.

    Returns:
        EventDict enriquecido con contexto de aplicación.
    """
    if hasattr(logger, "name"):
        event_dict["module"] = logger.name

    return event_dict


def coerce_numpy_values(logger: Any, method_name: str, event_dict: EventDict) -> EventDict:
    """
    Convierte escalares y arrays de numpy a tipos nativos.

    JSONRenderer no sabe serializar np.float64 ni np.ndarray; los servicios
    numéricos loggean esos valores con frecuencia.

    Args:
        logger: Logger de structlog.
        method_name: Método del logger.
        event_dict: Diccionario del evento.

    Returns:
        EventDict con valores serializables.
    """
    for key, value in event_dict.items():
        if isinstance(value, np.generic):
            event_dict[key] = value.item()
        elif isinstance(value, np.ndarray):
            event_dict[key] = value.tolist()

    return event_dict


# ==================== CONFIGURACIÓN DE STRUCTLOG ====================


def configure_logging(
    env: str = "development",
    component: str = "lab",
    level: str = "INFO",
    log_file: Path | None = None,
) -> None:
    """
    Configura el sistema de logging estructurado.

    Args:
        env: Entorno de ejecución ('development', 'production', 'test').
        component: Componente que emite ('lab', 'cli').
        level: Nivel mínimo de logging.
        log_file: Archivo opcional con rotación.

    Example:
        >>> configure_logging(env="production", component="cli")
    """
    numeric_level = getattr(logging, level.upper(), logging.INFO)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(numeric_level)

    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    root_logger.addHandler(console_handler)
    root_logger.setLevel(numeric_level)

    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            filename=log_file,
            maxBytes=MAX_BYTES,
            backupCount=BACKUP_COUNT,
            encoding="utf-8",
        )
        file_handler.setLevel(numeric_level)
        root_logger.addHandler(file_handler)

    processors: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso", utc=True),
        add_app_context,
        coerce_numpy_values,
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]

    if env == "development":
        processors.append(structlog.dev.ConsoleRenderer(colors=False))
    else:
        processors.append(structlog.processors.JSONRenderer())

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    structlog.get_logger(__name__).debug("logging_configured", env=env, component=component)


# ==================== FACTORY DE LOGGERS ====================


def get_logger(module_name: str) -> structlog.stdlib.BoundLogger:
    """
    Obtiene un logger estructurado para el módulo especificado.

    Args:
        module_name: Nombre del módulo (típicamente __name__).

    Returns:
        Logger estructurado de structlog.

    Example:
        >>> logger = get_logger(__name__)
        >>> logger.info("bracket_sets_generated", rank=3, depth=2)
    """
    return structlog.get_logger(module_name)


# ==================== INICIALIZACIÓN AUTOMÁTICA ====================

try:
    from src.core.config import settings

    _env = "development" if settings.is_development else "production"
    _level = settings.LOG_LEVEL
    _log_file = settings.LOG_FILE
except ImportError:
    _env, _level, _log_file = "development", "INFO", None

configure_logging(env=_env, component="lab", level=_level, log_file=_log_file)
