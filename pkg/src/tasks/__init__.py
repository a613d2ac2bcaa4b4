"""
Ejecución paralela por trayectorias.

Tareas disponibles:
- path_pool: map determinista de trabajos por stream_id sobre hilos
"""

from src.tasks.path_pool import map_paths

__all__ = ["map_paths"]
