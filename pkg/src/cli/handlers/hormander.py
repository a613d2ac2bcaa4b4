"""
Handler del comando hormander.

Rango del span de corchetes en initial_x, identidad del corchete corregido
(forma cerrada frente a corchetes anidados) y residuo de semimartingala de
Z_tσ_1(X_t). Escribe:
- span.csv: expression, v_1…v_n
- semimartingale.csv: level, dt, steps, residual
- report.json
"""

import numpy as np

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
from src.schemas.config import ExperimentConfig
from src.schemas.reports import CommandReport
from src.services.lie_hormander import (
    corrected_bracket,
    hormander_rank,
    nested_corrected_bracket,
    semimartingale_check,
)
from src.services.sde_solver import coarsen_brownian, sample_brownian, solve_mild, stream_generator
from src.services.variation_flow import solve_flows

logger = get_logger(__name__)

COMMAND = "hormander"
IDENTITY_POINTS = 10


def _corrected_identity_gap(model: ModelSpec, seed: int) -> float:
    """max sobre puntos aleatorios y columnas σ_k de |forma cerrada − anidada|."""
    rng = stream_generator(seed, AUXILIARY_STREAM)
    points = model.initial_x + rng.standard_normal((IDENTITY_POINTS, model.n))
    worst = 0.0
    for x in points:
        for column in model.diffusion.columns:
            gap = corrected_bracket(model, column, x) - nested_corrected_bracket(model, column, x)
            worst = max(worst, float(np.max(np.abs(gap))))
    return worst


def run_hormander(config: ExperimentConfig) -> CommandReport:
    """
    Ejecuta hormander.

    Args:
        config: Configuración efectiva.

    Returns:
        CommandReport con el SpanReport en results["span"] y compuertas
        corrected_identity, semimartingale, refinement_monotone y, si se
        configuró, expected_rank.

    Raises:
        ExpressionCapError: Si bracket_depth genera demasiadas expresiones.
    """
    context = prepare(COMMAND, config)
    model, grid = context.model, context.grid
    tolerances = config.tolerances

    span = hormander_rank(model, depth=config.bracket_depth, variant=config.bracket_variant)
    other = "classical" if config.bracket_variant == "corrected" else "corrected"
    other_rank = hormander_rank(model, depth=config.bracket_depth, variant=other).rank
    write_csv(
        context.directory / "span.csv",
        ["expression"] + [f"v_{i + 1}" for i in range(model.n)],
        ([vector.expression, *vector.value] for vector in span.vectors),
    )

    identity_gap = _corrected_identity_gap(model, config.seed)

    sigma_1 = model.diffusion.columns[0]
    levels = config.flow.refinement_levels
    finest = sample_brownian(config.seed, 0, fine_grid(grid, levels), model.m)
    table = []
    for level, factor in enumerate(refinement_factors(levels)):
        path = coarsen_brownian(finest, factor)
        X = solve_mild(model, path)
        flows = solve_flows(model, X, path, config.flow.formulation)
        table.append(
            {
                "level": level,
                "dt": path.grid.dt,
                "steps": path.grid.steps,
                "residual": semimartingale_check(model, X, flows, path, sigma_1),
            }
        )
    columns = ["level", "dt", "steps", "residual"]
    write_csv(context.directory / "semimartingale.csv", columns, ([row[c] for c in columns] for row in table))

    book = GateBook()
    book.at_most("corrected_identity", identity_gap, tolerances.corrected_identity)
    book.at_most("semimartingale", table[0]["residual"], tolerances.semimartingale)
    if tolerances.require_monotone_refinement:
        residuals = [row["residual"] for row in table]
        book.check("refinement_monotone", is_monotone_decreasing(residuals), value=residuals[-1])
    if tolerances.expect_full_rank is not None:
        book.check(
            "expected_rank",
            span.full_rank == tolerances.expect_full_rank,
            value=span.rank,
            threshold=model.n,
        )

    results = {
        "span": span,
        "rank": span.rank,
        "statement": span.statement,
        f"{other}_rank": other_rank,
        "corrected_identity_gap": identity_gap,
        "semimartingale": table,
    }
    logger.info("hormander_completed", rank=span.rank, n=model.n, depth=config.bracket_depth)
    return finish(context, book, results)
