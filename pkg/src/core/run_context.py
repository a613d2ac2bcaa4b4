"""
Context manager de ejecución con Run ID y logging estructurado.

Cada comando de la CLI (y cada lote de trayectorias) se ejecuta dentro de
run_context() para que todos sus logs compartan run_id y contexto.

Example:
    >>> from src.core.run_context import run_context
    >>> with run_context(command="flow-check", model="hypo3"):
    >>>     logger.info("flows_solved")
"""

import time
import uuid
from collections.abc import Generator
from contextlib import contextmanager
from typing import Any

import structlog

from src.core.logging_config import get_logger

logger = get_logger(__name__)


@contextmanager
def run_context(**context_vars: Any) -> Generator[str, None, None]:
    """
    Context manager para inyectar contexto de ejecución en los logs.

    Genera un Run ID único y lo inyecta en el contexto de structlog junto con
    las variables proporcionadas. El contexto previo se restaura al salir, de
    modo que los contextos pueden anidarse (comando > lote de trayectorias).

    Args:
        **context_vars: Variables de contexto (command, model, label, ...).

    Yields:
        El run_id generado.

    Example:
        >>> with run_context(command="density", model="hypo3") as run_id:
        >>>     logger.info("sampling_started")
    """
    run_id = str(uuid.uuid4())
    previous = structlog.contextvars.get_contextvars()

    structlog.contextvars.bind_contextvars(run_id=run_id, **context_vars)

    start_time = time.perf_counter()
    logger.info("run_started", **context_vars)

    try:
        yield run_id

        duration_ms = int((time.perf_counter() - start_time) * 1000)
        logger.info("run_completed", duration_ms=duration_ms, **context_vars)

    except Exception as exc:
        duration_ms = int((time.perf_counter() - start_time) * 1000)
        logger.error(
            "run_failed",
            error=str(exc),
            error_type=type(exc).__name__,
            duration_ms=duration_ms,
            **context_vars,
        )
        raise

    finally:
        structlog.contextvars.clear_contextvars()
        if previous:
            structlog.contextvars.bind_contextvars(**previous)


def bind_run_context(**context_vars: Any) -> None:
    """
    Bind adicional de variables al contexto actual.

    Args:
        **context_vars: Variables de contexto a añadir.
    """
    structlog.contextvars.bind_contextvars(**context_vars)
