"""Laboratorio numérico de Hörmander para ecuaciones de evolución estocásticas."""

__version__ = "0.1.0"
