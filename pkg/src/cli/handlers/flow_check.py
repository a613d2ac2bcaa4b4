"""
Handler del comando flow-check.

Comprueba la primera variación Y_t contra diferencias finitas con el mismo
browniano y el inverso a derecha Z_t por su residuo. Escribe:
- residual_q.csv: t, residual_q (trayectoria 0)
- refinement.csv: level, dt, steps, residual_q, range_defect
- fd_directions.csv: direction, relative_error
- report.json
"""

import numpy as np
from numpy.typing import NDArray

from src.cli.handlers.common import (
    AUXILIARY_STREAM,
    GateBook,
    fine_grid,
    finish,
    is_monotone_decreasing,
    prepare,
    refinement_factors,
)
from src.cli.utils.writers import write_csv
from src.core.logging_config import get_logger
from src.models.model_spec import ModelSpec
from src.models.paths import BrownianPath, Formulation
from src.schemas.config import ExperimentConfig
from src.schemas.reports import CommandReport
from src.services.sde_solver import coarsen_brownian, sample_brownian, solve_mild, stream_generator
from src.services.variation_flow import (
    FormulationError,
    finite_difference_flow,
    range_inverse_defect,
    residual_Q,
    smallest_singular_value,
    solve_right_inverse,
)
from src.tasks.path_pool import map_paths

logger = get_logger(__name__)

COMMAND = "flow-check"


def _fd_errors(
    model: ModelSpec, path: BrownianPath, Y_T: NDArray[np.float64], directions: NDArray[np.float64], epsilon: float
) -> list[float]:
    errors = []
    for direction in directions:
        exact = Y_T @ direction
        approx = finite_difference_flow(model, path, direction, epsilon)
        scale = np.linalg.norm(exact)
        gap = np.linalg.norm(approx - exact)
        errors.append(float(gap / scale) if scale > 0 else float(gap))
    return errors


def _formulation_agreement(model: ModelSpec, path: BrownianPath) -> tuple[float | None, str | None]:
    """max_t ‖Z_conj − Z_dir‖_F / max_t ‖Z_dir‖_F, o (None, motivo) si no aplica."""
    if not model.sg.is_diagonal:
        return None, "semigrupo denso: solo formulación directa"
    X = solve_mild(model, path)
    try:
        conjugated = solve_right_inverse(model, X, path, Formulation.CONJUGATED)
    except FormulationError as exc:
        return None, str(exc)
    direct = solve_right_inverse(model, X, path, Formulation.DIRECT, first_variation=conjugated)
    scale = float(np.max(np.linalg.norm(direct.Z, axis=(1, 2))))
    gap = float(np.max(np.linalg.norm(conjugated.Z - direct.Z, axis=(1, 2))))
    return gap / scale if scale > 0 else gap, None


def run_flow_check(config: ExperimentConfig) -> CommandReport:
    """
    Ejecuta flow-check.

    Args:
        config: Configuración efectiva.

    Returns:
        CommandReport con compuertas fd_relative, residual_q,
        range_inverse_defect, formulation_agreement y refinement_monotone.

    Raises:
        FormulationError: Si flow.formulation = "conjugated" no es aplicable.
    """
    context = prepare(COMMAND, config)
    model, grid = context.model, context.grid
    tolerances = config.tolerances
    formulation = config.flow.formulation

    def run_path(stream_id: int) -> tuple[NDArray[np.float64], float]:
        path = sample_brownian(config.seed, stream_id, grid, model.m)
        X = solve_mild(model, path)
        bundle = solve_right_inverse(model, X, path, formulation)
        return residual_Q(bundle), range_inverse_defect(bundle, model, grid, seed=config.seed)

    per_path = map_paths(run_path, range(config.monte_carlo.paths), config.workers)
    residual_max = max(float(np.max(curve)) for curve, _ in per_path)
    range_defect = max(defect for _, defect in per_path)
    write_csv(
        context.directory / "residual_q.csv",
        ["t", "residual_q"],
        zip(grid.nodes.tolist(), per_path[0][0].tolist()),
    )

    # Primera variación contra diferencias finitas en la trayectoria 0
    path0 = sample_brownian(config.seed, 0, grid, model.m)
    X0 = solve_mild(model, path0)
    flows0 = solve_right_inverse(model, X0, path0, formulation)
    directions = stream_generator(config.seed, AUXILIARY_STREAM).standard_normal((config.flow.fd_directions, model.n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    fd_errors = _fd_errors(model, path0, flows0.Y[-1], directions, config.flow.fd_epsilon)
    write_csv(context.directory / "fd_directions.csv", ["direction", "relative_error"], enumerate(fd_errors))

    agreement, agreement_skipped = _formulation_agreement(model, path0)

    # Refinamiento con un único browniano fino agregado a cada nivel
    levels = config.flow.refinement_levels
    finest = sample_brownian(config.seed, 0, fine_grid(grid, levels), model.m)
    table = []
    for level, factor in enumerate(refinement_factors(levels)):
        coarse = coarsen_brownian(finest, factor)
        X = solve_mild(model, coarse)
        bundle = solve_right_inverse(model, X, coarse, formulation)
        table.append(
            {
                "level": level,
                "dt": coarse.grid.dt,
                "steps": coarse.grid.steps,
                "residual_q": float(np.max(residual_Q(bundle))),
                "range_defect": range_inverse_defect(bundle, model, coarse.grid, seed=config.seed),
            }
        )
    columns = ["level", "dt", "steps", "residual_q", "range_defect"]
    write_csv(context.directory / "refinement.csv", columns, ([row[c] for c in columns] for row in table))

    book = GateBook()
    book.at_most("fd_relative", max(fd_errors), tolerances.fd_relative)
    book.at_most("residual_q", residual_max, tolerances.residual_q)
    book.at_most("range_inverse_defect", range_defect, tolerances.residual_q)
    if agreement is not None:
        book.at_most("formulation_agreement", agreement, tolerances.formulation_agreement)
    if tolerances.require_monotone_refinement:
        residuals = [row["residual_q"] for row in table]
        book.check("refinement_monotone", is_monotone_decreasing(residuals), value=residuals[-1])

    results = {
        "formulation": flows0.formulation.value if flows0.formulation else None,
        "fd_relative_errors": fd_errors,
        "fd_epsilon": config.flow.fd_epsilon,
        "residual_q_max": residual_max,
        "range_inverse_defect": range_defect,
        "formulation_agreement": agreement,
        "formulation_agreement_skipped": agreement_skipped,
        "refinement": table,
        "smallest_singular_value_Y_T": smallest_singular_value(flows0),
    }
    logger.info("flow_check_completed", residual_q_max=residual_max, fd_error=max(fd_errors))
    return finish(context, book, results)
