"""
Tests unitarios para la acción del semigrupo y las normas ponderadas.
"""

import numpy as np
import pytest

from src.core.exceptions import DimensionMismatchError, InvalidArgumentError, LabError, NonFiniteInputError
from src.models.spaces import OverflowCapError, Semigroup, SemigroupKindError, TruncationConfig
from src.services.spaces_service import (
    apply_inverse_semigroup,
    apply_semigroup,
    e_norm,
    h_norm,
    hs_norm,
    hs_norms,
    op_norm,
)


class TestApplySemigroup:
    """Tests de exp(tA)·v y su inversa."""

    def test_halving_with_log_two(self):
        """Test 1: λ = −1 y t = ln 2 reducen v a la mitad"""
        # Arrange
        sg = Semigroup.diagonal([-1.0])

        # Act
        result = apply_semigroup(sg, np.log(2.0), np.array([1.0]))

        # Assert
        np.testing.assert_allclose(result, [0.5], rtol=1e-15)

    def test_zero_time_returns_copy(self):
        """Test 2: t = 0 devuelve v sin aliasing"""
        # Arrange
        sg = Semigroup.dense([[-1.0, 2.0], [0.0, -1.0]])
        v = np.array([1.0, -2.0])

        # Act
        result = apply_semigroup(sg, 0.0, v)
        result[0] = 99.0

        # Assert
        assert v[0] == 1.0

    def test_inverse_round_trip(self, rng):
        """Test 3: exp(−tA)exp(tA)v = v dentro del overflow_cap"""
        # Arrange
        sg = Semigroup.diagonal([-0.5, -3.0, -10.0])
        v = rng.standard_normal(3)

        # Act
        back = apply_inverse_semigroup(sg, 2.0, apply_semigroup(sg, 2.0, v))

        # Assert
        np.testing.assert_allclose(back, v, rtol=1e-12)

    def test_inverse_beyond_cap(self):
        """Test 4: t·|λ| > overflow_cap lanza OverflowCapError"""
        # Arrange
        sg = Semigroup.diagonal([-100.0], overflow_cap=40.0)

        # Act & Assert
        with pytest.raises(OverflowCapError, match="apply_inverse_semigroup"):
            apply_inverse_semigroup(sg, 1.0, np.array([1.0]))

    def test_inverse_rejects_dense(self):
        """Test 5: el tipo denso lanza SemigroupKindError"""
        # Arrange
        sg = Semigroup.dense(-np.eye(2))

        # Act & Assert
        with pytest.raises(SemigroupKindError):
            apply_inverse_semigroup(sg, 0.1, np.ones(2))

    def test_rejects_wrong_dimension(self):
        """Test 6: v de dimensión distinta de n lanza DimensionMismatchError"""
        # Arrange
        sg = Semigroup.diagonal([-1.0, -2.0])

        # Act & Assert
        with pytest.raises(DimensionMismatchError):
            apply_semigroup(sg, 1.0, np.ones(3))

    def test_rejects_nan(self):
        """Test 7: NaN en v lanza NonFiniteInputError"""
        # Arrange
        sg = Semigroup.diagonal([-1.0])

        # Act & Assert
        with pytest.raises(NonFiniteInputError):
            apply_semigroup(sg, 1.0, np.array([np.nan]))

    def test_rejects_negative_time(self):
        """Test 8: t < 0 no está en el dominio del semigrupo y es un error del laboratorio"""
        # Arrange
        sg = Semigroup.diagonal([-1.0])

        # Act & Assert
        with pytest.raises(InvalidArgumentError, match="t debe ser >= 0") as exc_info:
            apply_semigroup(sg, -0.1, np.array([1.0]))

        assert isinstance(exc_info.value, LabError)


class TestNorms:
    """Tests de las normas ponderadas."""

    @pytest.fixture
    def cfg(self):
        return TruncationConfig(
            n=2, m=2, e_weights=np.array([1.0, 0.5]), h_weights=np.array([1.0, 2.0]), embed_constant=1.0
        )

    def test_hs_norm_identity(self):
        """Test 9: hs_norm(I₂) = √2 con pesos unitarios"""
        # Act
        value = hs_norm(TruncationConfig.unit(2, 2), np.eye(2))

        # Assert
        assert value == pytest.approx(np.sqrt(2.0), rel=1e-15)

    def test_weighted_norms(self, cfg):
        """Test 10: e_norm y h_norm aplican los pesos coordenada a coordenada"""
        # Arrange
        v = np.array([3.0, 8.0])

        # Assert
        assert e_norm(cfg, v) == pytest.approx(5.0)
        assert h_norm(cfg, v) == pytest.approx(np.sqrt(9.0 + 256.0))

    def test_hs_norm_matches_column_sum(self, cfg, rng):
        """Test 11: hs_norm² = Σ_k e_norm(M·e_k)²·h_k⁻²"""
        # Arrange
        M = rng.standard_normal((2, 2))
        expected = sum(e_norm(cfg, M[:, k]) ** 2 / cfg.h_weights[k] ** 2 for k in range(2))

        # Assert
        assert hs_norm(cfg, M) ** 2 == pytest.approx(expected, rel=1e-12)

    def test_hs_norms_stack(self, cfg, rng):
        """Test 12: hs_norms coincide con hs_norm matriz a matriz"""
        # Arrange
        stack = rng.standard_normal((4, 2, 2))

        # Act
        values = hs_norms(cfg, stack)

        # Assert
        np.testing.assert_allclose(values, [hs_norm(cfg, M) for M in stack], rtol=1e-13)

    def test_op_norm_of_diagonal(self, cfg):
        """Test 13: la norma de operador de diag(2, −3) es 3 en cualquier peso diagonal"""
        # Assert
        assert op_norm(cfg, np.diag([2.0, -3.0])) == pytest.approx(3.0)

    def test_hs_norm_rejects_shape(self, cfg):
        """Test 14: una matriz que no es n×m lanza DimensionMismatchError"""
        # Act & Assert
        with pytest.raises(DimensionMismatchError):
            hs_norm(cfg, np.zeros((3, 2)))

    def test_hs_norm_ideal_inequality(self, rng):
        """Test 15: ‖AB‖_HS <= ‖A‖_op·‖B‖_HS con pesos diagonales aleatorios"""
        for _ in range(20):
            # Arrange
            cfg = TruncationConfig(
                n=3,
                m=2,
                e_weights=rng.uniform(0.2, 1.0, 3),
                h_weights=rng.uniform(1.0, 3.0, 2),
                embed_constant=1.0,
            )
            A = rng.standard_normal((3, 3))
            B = rng.standard_normal((3, 2))

            # Act
            product = hs_norm(cfg, A @ B)
            bound = op_norm(cfg, A) * hs_norm(cfg, B)

            # Assert
            assert product <= bound * (1 + 1e-12)
