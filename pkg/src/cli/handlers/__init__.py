"""
Handlers de los subcomandos de la CLI.

Cada handler es una función que recibe la ExperimentConfig efectiva,
escribe sus artefactos en <output_dir>/<command>/<label>/ y devuelve un
CommandReport.
"""

from src.cli.handlers.density import run_density
from src.cli.handlers.flow_check import run_flow_check
from src.cli.handlers.hormander import run_hormander
from src.cli.handlers.malliavin import run_malliavin
from src.cli.handlers.simulate import run_simulate

__all__ = [
    "run_simulate",
    "run_flow_check",
    "run_malliavin",
    "run_hormander",
    "run_density",
]
