"""
Escritura de artefactos de una ejecución.

Layout: <output_dir>/<command>/<label>/{manifest.json, *.csv, report.json}.
Ningún fichero lleva marcas de tiempo: dos ejecuciones con la misma
configuración producen bytes idénticos.

- JSON: sort_keys=True, indent=2, salto de línea final.
- CSV: RFC-4180 (csv.writer, terminador "\\r\\n"), cabecera obligatoria,
  floats con repr() (ida y vuelta exacta, '.' como separador decimal).
"""

import csv
import json
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

from src import __version__
from src.core.exceptions import InvalidArgumentError
from src.models.model_spec import ModelSpec
from src.schemas.config import ExperimentConfig


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, Path):
        return value.as_posix()
    raise TypeError(f"Tipo no serializable: {type(value).__name__}")


def dumps(payload: Any) -> str:
    """JSON canónico (claves ordenadas, indentación 2)."""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default, ensure_ascii=False)


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload) + "\n", encoding="utf-8")
    return path


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """
    Escribe un CSV con cabecera.

    Args:
        path: Fichero destino (se crean los directorios padre).
        header: Nombres de columna.
        rows: Filas con la misma longitud que header.

    Returns:
        La ruta escrita.

    Raises:
        InvalidArgumentError: Si alguna fila no tiene len(header) celdas.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise InvalidArgumentError(f"{path.name}: fila de {len(row)} celdas, se esperaban {len(header)}")
            writer.writerow([_cell(value) for value in row])
    return path


def run_directory(config: ExperimentConfig, command: str) -> Path:
    """<output_dir>/<command>/<label>, creado si no existe."""
    directory = Path(config.output_dir) / command / config.label
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def write_manifest(directory: Path, command: str, config: ExperimentConfig, model: ModelSpec) -> Path:
    """
    manifest.json con todo lo necesario para repetir la ejecución.

    La clave "config" es la configuración efectiva (tras los flags);
    `--config <dir>/manifest.json` la recarga y reproduce los mismos ficheros.
    """
    manifest = {
        "command": command,
        "code_version": __version__,
        "seed": config.seed,
        "model": model.name,
        "n": model.n,
        "m": model.m,
        "T": config.grid.T,
        "steps": config.grid.steps,
        "dt": config.dt,
        "workers": config.workers,
        "config": config.model_dump(mode="json"),
    }
    return write_json(directory / "manifest.json", manifest)
