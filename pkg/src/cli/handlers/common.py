"""
Piezas compartidas por los handlers de comandos.

Cada handler recibe la ExperimentConfig efectiva, prepara su directorio con
prepare(), acumula compuertas de tolerancia en un GateBook y termina con
finish(), que escribe report.json y devuelve el CommandReport.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from src.cli.utils.writers import run_directory, write_json, write_manifest
from src.core.logging_config import get_logger
from src.core.metrics import get_metrics
from src.models.model_spec import ModelSpec
from src.models.spaces import TimeGrid
from src.schemas.config import ExperimentConfig, build_grid, build_model
from src.schemas.reports import CommandReport, GateResult, ReportHeader

logger = get_logger(__name__)
metrics = get_metrics()

# Flujo reservado para vectores auxiliares (direcciones, φ, puntos); no
# colisiona con los stream_id 0…N−1 de las trayectorias.
AUXILIARY_STREAM = 2**32

# Por debajo de este valor dos residuos se consideran iguales (redondeo).
MONOTONE_FLOOR = 1e-13


@dataclass
class CommandContext:
    """Modelo, malla y directorio de una ejecución."""

    command: str
    config: ExperimentConfig
    model: ModelSpec
    grid: TimeGrid
    directory: Path

    @property
    def header(self) -> ReportHeader:
        return ReportHeader(
            model=self.model.name,
            n=self.model.n,
            m=self.model.m,
            dt=self.grid.dt,
            T=self.grid.T,
            steps=self.grid.steps,
        )


@dataclass
class GateBook:
    """Compuertas de tolerancia en orden de evaluación."""

    gates: list[GateResult] = field(default_factory=list)

    def at_most(self, name: str, value: float, threshold: float) -> bool:
        """value <= threshold (NaN nunca pasa)."""
        passed = bool(np.isfinite(value) and value <= threshold)
        self.gates.append(GateResult(name=name, value=float(value), threshold=float(threshold), passed=passed))
        return passed

    def check(self, name: str, passed: bool, value: float = 0.0, threshold: float = 0.0) -> bool:
        """Compuerta booleana con el valor medido como referencia."""
        self.gates.append(GateResult(name=name, value=float(value), threshold=float(threshold), passed=passed))
        return passed

    @property
    def failures(self) -> list[str]:
        return [gate.name for gate in self.gates if not gate.passed]


def prepare(command: str, config: ExperimentConfig) -> CommandContext:
    """Construye modelo y malla, crea el directorio y escribe manifest.json."""
    model = build_model(config)
    grid = build_grid(config)
    directory = run_directory(config, command)
    write_manifest(directory, command, config, model)
    return CommandContext(command=command, config=config, model=model, grid=grid, directory=directory)


def finish(context: CommandContext, book: GateBook, results: dict[str, Any]) -> CommandReport:
    """Cierra el comando: métricas de compuertas, report.json y log."""
    for gate in book.gates:
        metrics.tolerance_gates_total.labels(
            command=context.command, result="passed" if gate.passed else "failed"
        ).inc()

    failures = book.failures
    report = CommandReport(
        command=context.command,
        status="failed" if failures else "passed",
        header=context.header,
        gates=book.gates,
        failures=failures,
        results=results,
    )
    write_json(context.directory / "report.json", report)

    logger.info(
        "command_report_written",
        command=context.command,
        status=report.status,
        gates=len(book.gates),
        failures=failures,
    )
    return report


def is_monotone_decreasing(values: Sequence[float], floor: float = MONOTONE_FLOOR) -> bool:
    """Cada valor <= el anterior, salvo pares ambos por debajo de floor."""
    return all(nxt <= prev or max(prev, nxt) <= floor for prev, nxt in zip(values, values[1:]))


def refinement_factors(levels: int) -> list[int]:
    """Factores de agregación de la malla más fina a cada nivel (de grueso a fino)."""
    return [2 ** (levels - 1 - level) for level in range(levels)]


def fine_grid(grid: TimeGrid, levels: int) -> TimeGrid:
    """Malla más fina del estudio de refinamiento (dt / 2^(levels−1))."""
    return TimeGrid(T=grid.T, steps=grid.steps * 2 ** (levels - 1))


def quantiles(values: NDArray[np.float64]) -> dict[str, float]:
    if values.size == 0:
        return {}
    q = np.quantile(values, [0.0, 0.5, 1.0])
    return {"min": float(q[0]), "median": float(q[1]), "max": float(q[2])}
