"""
Punto de entrada de la CLI hormander-lab.

Subcomandos: simulate | flow-check | malliavin | hormander | density | all | schema.

Uso:
    poetry run hormander-lab hormander --config experiments/hypo3.json
    poetry run hormander-lab density --config experiments/degenerate2.json --paths 2000 --json
    poetry run hormander-lab schema > experiment.schema.json

Códigos de salida: 0 si todas las compuertas pasan, 1 si alguna falla,
2 ante un error (configuración inválida o LabError durante el cálculo).
"""

import argparse
import sys
import time
from collections.abc import Callable
from pathlib import Path

from src.cli.handlers import run_density, run_flow_check, run_hormander, run_malliavin, run_simulate
from src.cli.utils.writers import dumps, write_json
from src.core.exceptions import LabError
from src.core.logging_config import get_logger
from src.core.metrics import get_metrics, write_metrics_file
from src.core.run_context import run_context
from src.schemas.config import ConfigError, ExperimentConfig, apply_overrides, load_config
from src.schemas.reports import CommandReport, ErrorReport

logger = get_logger(__name__)
metrics = get_metrics()

# ==================== CONFIGURACIÓN ====================

Handler = Callable[[ExperimentConfig], CommandReport]

COMMANDS: dict[str, Handler] = {
    "simulate": run_simulate,
    "flow-check": run_flow_check,
    "malliavin": run_malliavin,
    "hormander": run_hormander,
    "density": run_density,
}

EXIT_PASSED = 0
EXIT_FAILED = 1
EXIT_ERROR = 2

_DEFAULTS = ExperimentConfig()


# ==================== ARGUMENTOS ====================


def build_parser() -> argparse.ArgumentParser:
    """Parser con un subparser por comando y los flags comunes."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="Fichero JSON de experimento (// comentarios)")
    common.add_argument("--seed", type=int, default=None, help=f"Semilla maestra (por defecto {_DEFAULTS.seed})")
    common.add_argument(
        "--paths",
        type=int,
        default=None,
        help=(
            f"Trayectorias Monte Carlo (por defecto {_DEFAULTS.monte_carlo.paths}; "
            f"density usa max(paths, 100), por defecto {_DEFAULTS.monte_carlo.density_samples})"
        ),
    )
    common.add_argument(
        "--dt",
        type=float,
        default=None,
        help=f"Paso de malla; fija steps = round(T/dt) (por defecto {_DEFAULTS.dt:g})",
    )
    common.add_argument(
        "--depth", type=int, default=None, help=f"Profundidad de corchetes (por defecto {_DEFAULTS.bracket_depth})"
    )
    common.add_argument(
        "--outdir", type=Path, default=None, help=f"Directorio raíz de salida (por defecto {_DEFAULTS.output_dir})"
    )
    common.add_argument(
        "--workers", type=int, default=None, help=f"Hilos del pool de trayectorias (por defecto {_DEFAULTS.workers})"
    )
    common.add_argument("--json", action="store_true", help="Escribe el reporte JSON en stdout")
    common.add_argument(
        "--metrics-file", type=Path, default=None, help="Vuelca las métricas Prometheus en este fichero"
    )

    parser = argparse.ArgumentParser(
        prog="hormander-lab",
        description="Laboratorio numérico de Hörmander para ecuaciones de evolución estocásticas truncadas.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("simulate", parents=[common], help="Trayectorias de la solución mild y Picard")
    subparsers.add_parser("flow-check", parents=[common], help="Primera variación e inverso a derecha")
    subparsers.add_parser("malliavin", parents=[common], help="Derivada de Malliavin y covarianza")
    subparsers.add_parser("hormander", parents=[common], help="Rango de corchetes de Lie")
    subparsers.add_parser("density", parents=[common], help="Veredicto de densidad (KDE, átomos, γ_T)")
    subparsers.add_parser("all", parents=[common], help="Los cinco comandos en orden")
    subparsers.add_parser("schema", help="Imprime el JSON schema de la configuración")
    return parser


# ==================== EJECUCIÓN ====================


def _error_details(exc: LabError) -> dict:
    """Atributos públicos y serializables de la excepción."""
    return {
        key: value
        for key, value in vars(exc).items()
        if not key.startswith("_") and isinstance(value, (str, int, float, bool, list, tuple, type(None)))
    }


def run_command(command: str, config: ExperimentConfig) -> CommandReport | ErrorReport:
    """
    Ejecuta un comando dentro de run_context y registra sus métricas.

    Un LabError se convierte en ErrorReport (también escrito como
    report.json del directorio del comando); las compuertas fallidas no son
    excepciones y viajan en el CommandReport.
    """
    started = time.perf_counter()
    try:
        with run_context(command=command, model=config.model_name, label=config.label):
            report: CommandReport | ErrorReport = COMMANDS[command](config)
        status = report.status
    except LabError as exc:
        report = ErrorReport(
            command=command,
            error_type=type(exc).__name__,
            message=str(exc),
            details=_error_details(exc),
        )
        write_json(Path(config.output_dir) / command / config.label / "report.json", report)
        status = "error"
    finally:
        metrics.command_duration_seconds.labels(command=command).observe(time.perf_counter() - started)

    metrics.command_runs_total.labels(command=command, status=status).inc()
    return report


def exit_code(report: CommandReport | ErrorReport) -> int:
    if isinstance(report, ErrorReport):
        return EXIT_ERROR
    return EXIT_PASSED if report.status == "passed" else EXIT_FAILED


def print_summary(report: CommandReport | ErrorReport) -> None:
    """Resumen legible en stdout (sin --json)."""
    print("=" * 60)
    if isinstance(report, ErrorReport):
        print(f"❌ {report.command}: {report.error_type}")
        print(f"   {report.message}")
        return

    icon = "✅" if report.status == "passed" else "❌"
    header = report.header
    print(f"{icon} {report.command}: {report.status}")
    print(f"   modelo={header.model} n={header.n} m={header.m} dt={header.dt:g} T={header.T:g}")
    for gate in report.gates:
        mark = "✓" if gate.passed else "✗"
        print(f"   {mark} {gate.name}: {gate.value:.3e} (umbral {gate.threshold:.3e})")
    if "statement" in report.results:
        print(f"   {report.results['statement']}")
    if "implication" in report.results:
        print(f"   {report.results['implication']}")


# ==================== MAIN ====================


def main(argv: list[str] | None = None) -> int:
    """
    Ejecuta la CLI.

    Args:
        argv: Argumentos (None = sys.argv[1:]).

    Returns:
        Código de salida (0 passed, 1 failed, 2 error).
    """
    args = build_parser().parse_args(argv)

    if args.command == "schema":
        print(dumps(ExperimentConfig.model_json_schema()))
        return EXIT_PASSED

    commands = list(COMMANDS) if args.command == "all" else [args.command]
    try:
        config = apply_overrides(
            load_config(args.config),
            seed=args.seed,
            paths=args.paths,
            dt=args.dt,
            depth=args.depth,
            outdir=args.outdir,
            workers=args.workers,
        )
    except ConfigError as exc:
        report = ErrorReport(
            command=args.command,
            error_type=type(exc).__name__,
            message=str(exc),
            details={"line": exc.line, "message": exc.message},
        )
        logger.error("config_invalid", line=exc.line, error=exc.message)
        if args.json:
            print(dumps(report))
        else:
            print_summary(report)
        return EXIT_ERROR

    reports = [run_command(command, config) for command in commands]

    if args.json:
        payload = reports[0] if len(reports) == 1 else {report.command: report for report in reports}
        print(dumps(payload))
    else:
        for report in reports:
            print_summary(report)

    if args.metrics_file is not None:
        write_metrics_file(args.metrics_file)

    return max(exit_code(report) for report in reports)


if __name__ == "__main__":
    sys.exit(main())
