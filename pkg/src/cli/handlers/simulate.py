"""
Handler del comando simulate.

Integra monte_carlo.paths trayectorias de la solución mild y escribe:
- paths.csv: t, x_1…x_n, path_id (una fila por nodo y trayectoria)
- picard.csv: k, delta (diagnóstico de contracción de Picard)
- report.json
"""

import numpy as np

from src.cli.handlers.common import GateBook, finish, prepare
from src.cli.utils.writers import write_csv
from src.core.config import settings
from src.core.logging_config import get_logger
from src.models.paths import SolutionPath
from src.schemas.config import ExperimentConfig
from src.schemas.reports import CommandReport
from src.services.sde_solver import BlowUpError, picard_diagnostic, sample_brownian, solve_mild
from src.tasks.path_pool import map_paths

logger = get_logger(__name__)

COMMAND = "simulate"


def _contraction_ratios(deltas: list[float]) -> list[float]:
    """δ_{k+1}/δ_k; 0 cuando δ_k = 0 (punto fijo alcanzado)."""
    return [nxt / prev if prev > 0 else 0.0 for prev, nxt in zip(deltas, deltas[1:])]


def run_simulate(config: ExperimentConfig) -> CommandReport:
    """
    Ejecuta simulate.

    Args:
        config: Configuración efectiva.

    Returns:
        CommandReport con compuertas blowup_fraction y picard_contraction.
    """
    context = prepare(COMMAND, config)
    model, grid = context.model, context.grid
    n_paths = config.monte_carlo.paths

    def run_path(stream_id: int) -> SolutionPath | None:
        path = sample_brownian(config.seed, stream_id, grid, model.m)
        try:
            return solve_mild(model, path)
        except BlowUpError:
            return None

    solutions = map_paths(run_path, range(n_paths), config.workers)
    blowups = sum(solution is None for solution in solutions)

    header = ["t"] + [f"x_{i + 1}" for i in range(model.n)] + ["path_id"]
    rows = (
        [float(t), *solution.states[j].tolist(), stream_id]
        for stream_id, solution in enumerate(solutions)
        if solution is not None
        for j, t in enumerate(grid.nodes)
    )
    write_csv(context.directory / "paths.csv", header, rows)

    deltas = picard_diagnostic(
        model,
        grid,
        n_iter=config.monte_carlo.picard_iterations,
        n_paths=config.monte_carlo.picard_paths,
        seed=config.seed,
        workers=config.workers,
    )
    write_csv(context.directory / "picard.csv", ["k", "delta"], [[k, delta] for k, delta in enumerate(deltas)])
    ratios = _contraction_ratios(deltas)

    book = GateBook()
    book.at_most("blowup_fraction", blowups / n_paths, settings.BLOWUP_FRACTION_LIMIT)
    book.at_most("picard_contraction", max(ratios), 1.0 - 1e-12)

    terminals = np.array([solution.terminal for solution in solutions if solution is not None])
    results = {
        "paths": n_paths,
        "blowups": blowups,
        "rows": (n_paths - blowups) * (grid.steps + 1),
        "terminal_mean": terminals.mean(axis=0).tolist() if terminals.size else [],
        "picard_deltas": deltas,
        "picard_ratios": ratios,
    }
    logger.info("simulate_completed", paths=n_paths, blowups=blowups)
    return finish(context, book, results)
