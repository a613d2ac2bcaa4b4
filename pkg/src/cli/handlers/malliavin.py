"""
Handler del comando malliavin.

Compara las dos vías de D_rX_t (ecuación lineal y fórmula de producto),
construye C_T y γ_T y verifica la identidad de la forma cuadrática.
Escribe:
- derivative.csv: t, sde_norm, product_norm (‖D_rX_t‖_F por nodo)
- refinement.csv: level, dt, steps, route_discrepancy
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
    quantiles,
    refinement_factors,
)
from src.cli.utils.writers import write_csv
from src.core.logging_config import get_logger
from src.models.model_spec import ModelSpec
from src.models.paths import BrownianPath
from src.schemas.config import ExperimentConfig, build_functional
from src.schemas.reports import CommandReport
from src.services.malliavin import (
    chain_rule_check,
    fd_chain_rule_check,
    covariance,
    gamma_spectrum,
    malliavin_energy,
    product_formula,
    product_route,
    quadratic_form,
    route_discrepancy,
    solve_malliavin_sde,
)
from src.services.sde_solver import coarsen_brownian, sample_brownian, solve_mild, stream_generator
from src.services.variation_flow import solve_flows

logger = get_logger(__name__)

COMMAND = "malliavin"
QUADRATIC_FORM_VECTORS = 100


def _route_gap(model: ModelSpec, path: BrownianPath, r_fraction: float, formulation: str) -> float:
    r_index = round(r_fraction * path.grid.steps)
    X = solve_mild(model, path)
    flows = solve_flows(model, X, path, formulation)
    return route_discrepancy(solve_malliavin_sde(model, X, path, r_index), product_route(flows, X, r_index))


def run_malliavin(config: ExperimentConfig) -> CommandReport:
    """
    Ejecuta malliavin.

    Args:
        config: Configuración efectiva.

    Returns:
        CommandReport con compuertas route_relative, zero_before_r,
        chain_rule, chain_rule_fd, quadratic_form y refinement_monotone.
    """
    context = prepare(COMMAND, config)
    model, grid = context.model, context.grid
    tolerances = config.tolerances
    formulation = config.flow.formulation
    functional = build_functional(config, model.n)
    r_index = round(config.malliavin.r_fraction * grid.steps)

    path = sample_brownian(config.seed, 0, grid, model.m)
    X = solve_mild(model, path)
    flows = solve_flows(model, X, path, formulation)
    sde = solve_malliavin_sde(model, X, path, r_index)
    product = product_route(flows, X, r_index)
    discrepancy = route_discrepancy(sde, product)

    write_csv(
        context.directory / "derivative.csv",
        ["t", "sde_norm", "product_norm"],
        zip(
            grid.nodes.tolist(),
            np.linalg.norm(sde.D, axis=(1, 2)).tolist(),
            np.linalg.norm(product.D, axis=(1, 2)).tolist(),
        ),
    )

    # D_rX_t = 0 para t < r en ambas vías
    before = float(np.max(np.abs(sde.D[:r_index]))) if r_index > 0 else 0.0
    if r_index > 0:
        before = max(before, float(np.max(np.abs(product_formula(flows, X, r_index, r_index - 1)))))

    chain_gap = chain_rule_check(functional, sde)
    chain_fd_gap = fd_chain_rule_check(functional, sde, X, config.flow.fd_epsilon)

    report = covariance(model, flows, X, functional)
    intermediate = None
    if config.malliavin.intermediate_index is not None:
        intermediate = covariance(model, flows, X, functional, t_index=config.malliavin.intermediate_index)

    phis = stream_generator(config.seed, AUXILIARY_STREAM).standard_normal((QUADRATIC_FORM_VECTORS, model.n))
    C = np.array(report.C)
    form_gap = 0.0
    for phi in phis:
        exact = float(phi @ C @ phi)
        form_gap = max(form_gap, abs(exact - quadratic_form(report, flows, X, phi)) / (1.0 + exact))

    levels = config.flow.refinement_levels
    finest = sample_brownian(config.seed, 0, fine_grid(grid, levels), model.m)
    table = []
    for level, factor in enumerate(refinement_factors(levels)):
        coarse = coarsen_brownian(finest, factor)
        table.append(
            {
                "level": level,
                "dt": coarse.grid.dt,
                "steps": coarse.grid.steps,
                "route_discrepancy": _route_gap(model, coarse, config.malliavin.r_fraction, formulation),
            }
        )
    columns = ["level", "dt", "steps", "route_discrepancy"]
    write_csv(context.directory / "refinement.csv", columns, ([row[c] for c in columns] for row in table))

    gammas = gamma_spectrum(model, functional, grid, config.monte_carlo.paths, config.seed, config.workers, formulation)

    book = GateBook()
    book.at_most("route_relative", discrepancy, tolerances.route_relative)
    book.at_most("zero_before_r", before, 0.0)
    book.at_most("chain_rule", chain_gap, tolerances.chain_rule)
    book.at_most("chain_rule_fd", chain_fd_gap, tolerances.chain_rule_fd)
    book.at_most("quadratic_form", form_gap, tolerances.quadratic_form)
    if tolerances.require_monotone_refinement:
        gaps = [row["route_discrepancy"] for row in table]
        book.check("refinement_monotone", is_monotone_decreasing(gaps), value=gaps[-1])

    results = {
        "r_index": r_index,
        "route_discrepancy": discrepancy,
        "zero_before_r": before,
        "chain_rule_gap": chain_gap,
        "chain_rule_fd_gap": chain_fd_gap,
        "quadratic_form_gap": form_gap,
        "covariance": report,
        "intermediate_covariance": intermediate,
        "malliavin_energy": malliavin_energy(model, X, flows),
        "gamma_min_eigenvalue": quantiles(gammas),
        "refinement": table,
    }
    logger.info("malliavin_completed", route_discrepancy=discrepancy, min_eigenvalue=report.min_eigenvalue)
    return finish(context, book, results)
