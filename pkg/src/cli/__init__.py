"""Interfaz de línea de comandos hormander-lab."""
