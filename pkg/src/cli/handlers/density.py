"""
Handler del comando density.

Simula ξ_T = F·X_T, estima la densidad por KDE y compara con la predicción
de rango de Hörmander y espectro de γ_T. Escribe:
- samples.csv: sample_id, xi_1…xi_k
- kde_curve.csv: coordinate, x, density (marginales 1D con h0 de Silverman)
- report.json (con la cadena de implicaciones en results["implication"])
"""

from src.cli.handlers.common import GateBook, finish, prepare
from src.cli.utils.writers import write_csv
from src.core.logging_config import get_logger
from src.schemas.config import ExperimentConfig, build_functional
from src.schemas.reports import CommandReport
from src.services.density import KdeGrid, kde, monte_carlo, silverman_bandwidth, verdict

logger = get_logger(__name__)

COMMAND = "density"


def run_density(config: ExperimentConfig) -> CommandReport:
    """
    Ejecuta density.

    Args:
        config: Configuración efectiva.

    Returns:
        CommandReport con el DensityReport en results["verdict"] y
        compuertas kde_normalization, verdict_consistent y, si se
        configuró, expected_rank.

    Raises:
        BlowUpFractionError: Si diverge más trayectorias de las toleradas.
        RankDeficientFunctionalError: Si F no tiene rango completo.
    """
    context = prepare(COMMAND, config)
    model, grid = context.model, context.grid
    tolerances = config.tolerances
    functional = build_functional(config, model.n)
    N = config.monte_carlo.density_samples

    sample_set = monte_carlo(model, functional, grid, N, config.seed, config.workers)
    report = verdict(
        model,
        functional,
        grid,
        N=N,
        depth=config.bracket_depth,
        master_seed=config.seed,
        gamma_paths=config.monte_carlo.gamma_paths,
        workers=config.workers,
        formulation=config.flow.formulation,
        variant=config.bracket_variant,
        sample_set=sample_set,
    )

    samples = sample_set.samples
    write_csv(
        context.directory / "samples.csv",
        ["sample_id"] + [f"xi_{d + 1}" for d in range(sample_set.k)],
        ([index, *row] for index, row in enumerate(samples.tolist())),
    )

    h0 = silverman_bandwidth(sample_set)
    curve_rows = []
    for d in range(sample_set.k):
        marginal = samples[:, [d]]
        kde_grid = KdeGrid.around(marginal, h0[[d]])
        values = kde(marginal, h0[[d]], kde_grid)
        curve_rows.extend([d + 1, x, value] for x, value in zip(kde_grid.axes[0].tolist(), values.tolist()))
    write_csv(context.directory / "kde_curve.csv", ["coordinate", "x", "density"], curve_rows)

    book = GateBook()
    book.at_most(
        "kde_normalization",
        max(abs(mass - 1.0) for mass in report.normalization),
        tolerances.kde_normalization,
    )
    book.check("verdict_consistent", bool(report.consistent), value=float(bool(report.consistent)), threshold=1.0)
    if tolerances.expect_full_rank is not None:
        full_rank = report.rank == model.n
        book.check("expected_rank", full_rank == tolerances.expect_full_rank, value=report.rank or 0, threshold=model.n)

    results = {
        "verdict": report,
        "atom_flag": report.atom_flag,
        "l1_discrepancy": report.l1_discrepancy,
        "implication": report.implication,
    }
    logger.info("density_completed", atom_flag=report.atom_flag, consistent=report.consistent)
    return finish(context, book, results)
