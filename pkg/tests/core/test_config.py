"""
Tests unitarios para Settings (pydantic-settings).
"""

import pytest
from pydantic import ValidationError

from src.core.config import Settings


class TestSettings:
    """Tests de valores por defecto y validación de entorno."""

    def test_defaults_without_env(self, monkeypatch):
        """Test 1: sin variables de entorno los valores numéricos son los documentados"""
        # Arrange
        for name in ("OVERFLOW_CAP", "MAX_FD_NESTING", "BRACKET_EXPRESSION_CAP", "LOG_LEVEL"):
            monkeypatch.delenv(name, raising=False)

        # Act
        config = Settings(_env_file=None)

        # Assert
        assert config.OVERFLOW_CAP == 40.0
        assert config.MAX_FD_NESTING == 2
        assert config.BRACKET_EXPRESSION_CAP == 500
        assert config.MAX_BRACKET_DEPTH == 3
        assert config.ATOM_FRACTION == 0.05

    def test_env_override(self, monkeypatch):
        """Test 2: las variables de entorno sustituyen los valores por defecto"""
        # Arrange
        monkeypatch.setenv("OVERFLOW_CAP", "25.5")
        monkeypatch.setenv("MAX_WORKERS", "4")

        # Act
        config = Settings(_env_file=None)

        # Assert
        assert config.OVERFLOW_CAP == 25.5
        assert config.MAX_WORKERS == 4

    def test_log_level_is_normalized(self, monkeypatch):
        """Test 3: LOG_LEVEL en minúsculas se acepta"""
        # Arrange
        monkeypatch.setenv("LOG_LEVEL", "debug")

        # Act
        config = Settings(_env_file=None)

        # Assert
        assert config.LOG_LEVEL == "DEBUG"

    def test_invalid_value_rejected(self, monkeypatch):
        """Test 4: un valor fuera de rango lanza ValidationError"""
        # Arrange
        monkeypatch.setenv("ATOM_FRACTION", "1.5")

        # Act & Assert
        with pytest.raises(ValidationError):
            Settings(_env_file=None)

    def test_environment_flags(self, monkeypatch):
        """Test 5: is_production / is_development siguen a ENVIRONMENT"""
        # Arrange
        monkeypatch.setenv("ENVIRONMENT", "production")

        # Act
        config = Settings(_env_file=None)

        # Assert
        assert config.is_production
        assert not config.is_development
