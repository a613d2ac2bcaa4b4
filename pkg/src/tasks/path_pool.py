"""
Pool de trayectorias independientes.

Cada trabajo recibe un stream_id y es una función pura de (semilla, stream_id);
los resultados se escriben en su índice, de modo que la salida no depende del
orden de terminación ni del número de hilos.

Example:
    >>> results = map_paths(lambda sid: solve(sid), range(100), workers=4)
"""

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import TypeVar

from src.core.config import settings
from src.core.logging_config import get_logger

logger = get_logger(__name__)

T = TypeVar("T")


def map_paths(
    worker: Callable[[int], T],
    stream_ids: Sequence[int],
    workers: int | None = None,
) -> list[T]:
    """
    Ejecuta worker(stream_id) para cada trayectoria.

    Args:
        worker: Trabajo por trayectoria; debe ser puro en stream_id.
        stream_ids: Índices de flujo a procesar.
        workers: Hilos (None = settings.MAX_WORKERS; 1 = secuencial).

    Returns:
        Resultados en el mismo orden que stream_ids.

    Raises:
        Exception: La primera excepción de un trabajo se propaga tal cual.
    """
    ids = list(stream_ids)
    n_workers = settings.MAX_WORKERS if workers is None else workers

    if n_workers <= 1 or len(ids) <= 1:
        return [worker(stream_id) for stream_id in ids]

    results: list[T | None] = [None] * len(ids)
    with ThreadPoolExecutor(max_workers=n_workers) as executor:
        futures = {executor.submit(worker, stream_id): index for index, stream_id in enumerate(ids)}

        for future in as_completed(futures):
            results[futures[future]] = future.result()

    logger.debug("path_batch_completed", paths=len(ids), workers=n_workers)
    return results  # type: ignore[return-value]
