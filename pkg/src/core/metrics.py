"""
Sistema de métricas centralizado con Prometheus.

Este módulo proporciona un singleton para todas las métricas del laboratorio,
asegurando consistencia en nombres, labels y tipos de métricas.

Tipos de métricas:
- Counter: Operaciones incrementales (paths_simulated_total)
- Gauge: Valores que suben/bajan (hormander_rank)
- Histogram: Distribución de valores (command_duration_seconds)

Convenciones de nombres:
- lowercase con snake_case
- sufijo _total para counters
- sufijo _seconds para duraciones
- labels con valores de baja cardinalidad

El laboratorio no expone un endpoint HTTP: la CLI vuelca el registro a un
archivo de texto con write_metrics_file() cuando se pasa --metrics-file.
"""

from pathlib import Path
from typing import Optional

from prometheus_client import (
    REGISTRY,
    CollectorRegistry,
    Counter,
    Gauge,
    Histogram,
    write_to_textfile,
)


class PrometheusMetrics:
    """
    Singleton para métricas de Prometheus.

    Todas las métricas se inicializan aquí para evitar re-registros
    y mantener un catálogo centralizado.
    """

    _instance: Optional["PrometheusMetrics"] = None

    def __new__(cls, registry: CollectorRegistry | None = None):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self, registry: CollectorRegistry | None = None):
        # Evitar re-inicialización del singleton
        if self._initialized:
            return

        self._registry = registry or REGISTRY
        self._init_simulation_metrics()
        self._init_flow_metrics()
        self._init_lie_metrics()
        self._init_command_metrics()

        self._initialized = True

    @property
    def registry(self) -> CollectorRegistry:
        """Registro donde viven las métricas."""
        return self._registry

    def _init_simulation_metrics(self):
        """Métricas de simulación de trayectorias."""

        self.paths_simulated_total = Counter(
            "paths_simulated_total",
            "Total de trayectorias simuladas",
            ["model", "status"],  # completed|blowup
            registry=self._registry,
        )

        self.path_blowups_total = Counter(
            "path_blowups_total",
            "Trayectorias abortadas por estado no finito",
            ["model"],
            registry=self._registry,
        )

        self.path_solve_duration_seconds = Histogram(
            "path_solve_duration_seconds",
            "Duración de la integración de una trayectoria por etapa",
            ["stage"],  # mild|flows|malliavin
            buckets=(0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 60.0),
            registry=self._registry,
        )

    def _init_flow_metrics(self):
        """Métricas de flujos de variación."""

        self.flow_solves_total = Counter(
            "flow_solves_total",
            "Resoluciones del inverso a derecha por formulación",
            ["formulation"],  # conjugated|direct
            registry=self._registry,
        )

        self.overflow_fallbacks_total = Counter(
            "overflow_fallbacks_total",
            "Veces que la formulación conjugada cayó a la directa por overflow_cap",
            registry=self._registry,
        )

    def _init_lie_metrics(self):
        """Métricas del test de Hörmander."""

        self.bracket_expressions_total = Counter(
            "bracket_expressions_total",
            "Expresiones de corchetes evaluadas",
            ["model"],
            registry=self._registry,
        )

        self.hormander_rank = Gauge(
            "hormander_rank",
            "Último rango de corchetes calculado",
            ["model"],
            registry=self._registry,
        )

    def _init_command_metrics(self):
        """Métricas de comandos de la CLI."""

        self.command_runs_total = Counter(
            "command_runs_total",
            "Ejecuciones de comandos",
            ["command", "status"],  # passed|failed|error
            registry=self._registry,
        )

        self.command_duration_seconds = Histogram(
            "command_duration_seconds",
            "Duración de los comandos de la CLI",
            ["command"],
            buckets=(0.1, 0.5, 1.0, 5.0, 10.0, 30.0, 60.0, 120.0, 300.0, 600.0),
            registry=self._registry,
        )

        self.tolerance_gates_total = Counter(
            "tolerance_gates_total",
            "Resultados de las compuertas de tolerancia",
            ["command", "result"],  # passed|failed
            registry=self._registry,
        )


# Singleton global
metrics = PrometheusMetrics()


def get_metrics() -> PrometheusMetrics:
    """
    Obtener la instancia global de métricas.

    Returns:
        PrometheusMetrics: Singleton de métricas
    """
    return metrics


def write_metrics_file(path: Path) -> None:
    """
    Vuelca el registro de métricas en formato de texto de Prometheus.

    Args:
        path: Archivo destino (se crean los directorios padre).
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    write_to_textfile(str(path), metrics.registry)
