"""
Tests unitarios para el zoo de modelos y las cantidades derivadas.
"""

import numpy as np
import pytest

from src.core.exceptions import DimensionMismatchError
from src.models.fields import InvalidModelError
from src.services.model_zoo import (
    HEAT_DIM,
    UnknownModelError,
    available_models,
    big_sigma,
    polynomial_model,
    sigma0,
    zoo,
)


class TestZoo:
    """Tests de construcción de los modelos de referencia."""

    def test_available_models(self):
        """Test 1: el zoo expone los cuatro modelos ordenados"""
        # Assert
        assert available_models() == ["degenerate2", "heat_mult", "hypo3", "linear_gauss"]

    @pytest.mark.parametrize(
        "name,n,m",
        [("heat_mult", HEAT_DIM, HEAT_DIM), ("hypo3", 3, 1), ("degenerate2", 2, 1), ("linear_gauss", 4, 4)],
    )
    def test_dimensions(self, name, n, m):
        """Test 2: dimensiones de truncación de cada modelo"""
        # Act
        model = zoo(name)

        # Assert
        assert (model.n, model.m) == (n, m)
        assert model.name == name
        assert model.sg.is_diagonal

    def test_unknown_model(self):
        """Test 3: un nombre desconocido lista los disponibles"""
        # Act & Assert
        with pytest.raises(UnknownModelError, match="hypo3") as exc_info:
            zoo("no_such_model")

        assert exc_info.value.name == "no_such_model"
        assert "heat_mult" in exc_info.value.available

    def test_heat_mult_spectrum_within_cap(self, heat_mult):
        """Test 4: max|λ|·T con T = 1 queda por debajo del overflow_cap por defecto"""
        # Act
        largest = float(np.max(np.abs(heat_mult.sg.spectrum)))

        # Assert
        assert largest == pytest.approx(0.05 * (HEAT_DIM * np.pi) ** 2)
        assert largest < heat_mult.sg.overflow_cap

    def test_initial_condition_is_frozen(self, hypo3):
        """Test 5: initial_x no se puede mutar"""
        # Act & Assert
        with pytest.raises(ValueError):
            hypo3.initial_x[0] = 1.0


class TestDerivedQuantities:
    """Tests de σ_0 y Σ."""

    def test_sigma0_of_hypo3_is_chain(self, hypo3, rng):
        """Test 6: con σ constante, σ_0(x) = Ax + α(x) = (0, x0, x1)"""
        # Arrange
        x = rng.standard_normal(3)

        # Act
        value = sigma0(hypo3, x)

        # Assert
        np.testing.assert_allclose(value, [0.0, x[0], x[1]], atol=1e-15)

    def test_sigma0_includes_stratonovich_correction(self, heat_mult, rng):
        """Test 7: σ_0 = Ax + α − ½Σ_kσ'_kσ_k coordenada a coordenada en heat_mult"""
        # Arrange
        x = rng.standard_normal(HEAT_DIM)
        t = np.tanh(x)
        sigma = 0.3 * (1.0 + 0.5 * t)
        slope = 0.3 * 0.5 * (1.0 - t**2)
        expected = heat_mult.sg.spectrum * x + 0.5 * t - 0.5 * slope * sigma

        # Act
        value = sigma0(heat_mult, x)

        # Assert
        np.testing.assert_allclose(value, expected, rtol=1e-12, atol=1e-14)

    def test_big_sigma_is_jacobian_composition(self, heat_mult, rng):
        """Test 8: Σ(x) = Σ_kσ'_kσ'_k es diagonal con entradas (σ'_k)_kk²"""
        # Arrange
        x = rng.standard_normal(HEAT_DIM)
        slope = 0.3 * 0.5 * (1.0 - np.tanh(x) ** 2)

        # Act
        value = big_sigma(heat_mult, x)

        # Assert
        np.testing.assert_allclose(value, np.diag(slope**2), atol=1e-16)

    def test_big_sigma_vanishes_for_additive_noise(self, linear_gauss):
        """Test 9: ruido aditivo da Σ ≡ 0"""
        # Assert
        assert not np.any(big_sigma(linear_gauss, np.ones(4)))

    @pytest.mark.parametrize("name", ["heat_mult", "hypo3", "degenerate2", "linear_gauss"])
    def test_big_sigma_is_positive_semidefinite(self, name, rng):
        """Test 14: Σ(x) es simétrica semidefinida positiva en los modelos del zoo"""
        # Arrange
        model = zoo(name)

        for _ in range(10):
            # Act
            value = big_sigma(model, 2.0 * rng.standard_normal(model.n))

            # Assert
            np.testing.assert_allclose(value, value.T, atol=1e-15)
            assert np.min(np.linalg.eigvalsh(value)) >= -1e-12


class TestPolynomialModel:
    """Tests del modelo polinomial de usuario."""

    def test_cubic_model_fields(self, cubic_model):
        """Test 10: deriva y difusión polinomiales evaluadas en un punto"""
        # Arrange
        x = np.array([2.0, 3.0])

        # Assert
        np.testing.assert_allclose(cubic_model.drift.eval(x), [-8.0, 6.0])
        np.testing.assert_allclose(cubic_model.diffusion.assemble(x), [[1.0], [2.0]])
        assert cubic_model.drift.as_symbolic() is not None

    def test_rejects_both_generators(self):
        """Test 11: spectrum y generator a la vez es ambiguo"""
        # Act & Assert
        with pytest.raises(InvalidModelError, match="exactamente uno"):
            polynomial_model(
                name="bad",
                n=1,
                m=1,
                drift=[[]],
                diffusion=[[[(1.0, (0,))]]],
                initial_x=[0.0],
                spectrum=[-1.0],
                generator=[[-1.0]],
            )

    def test_rejects_wrong_initial_dimension(self):
        """Test 12: initial_x de dimensión distinta lanza DimensionMismatchError"""
        # Act & Assert
        with pytest.raises(DimensionMismatchError, match="initial_x"):
            polynomial_model(
                name="bad",
                n=2,
                m=1,
                drift=[[], []],
                diffusion=[[[(1.0, (0, 0))], []]],
                initial_x=[0.0],
                spectrum=[-1.0, -1.0],
            )

    def test_dense_generator(self):
        """Test 13: un generador denso produce un semigrupo denso"""
        # Act
        model = polynomial_model(
            name="dense",
            n=2,
            m=1,
            drift=[[], []],
            diffusion=[[[(1.0, (0, 0))], []]],
            initial_x=[1.0, 0.0],
            generator=[[0.0, 1.0], [-1.0, 0.0]],
        )

        # Assert
        assert not model.sg.is_diagonal
        np.testing.assert_allclose(model.sg.matrix(np.pi / 2) @ [1.0, 0.0], [0.0, -1.0], atol=1e-12)
