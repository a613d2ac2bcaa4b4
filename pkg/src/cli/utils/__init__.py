"""Utilidades de la CLI: escritura determinista de artefactos."""

from src.cli.utils.writers import dumps, run_directory, write_csv, write_json, write_manifest

__all__ = ["dumps", "run_directory", "write_csv", "write_json", "write_manifest"]
