"""
Tests unitarios para Monte Carlo, KDE, átomos y veredicto de densidad.

Estrategia de testing:
- KDE contra la normal estándar (valor en 0 y masa total)
- Átomos sintéticos y el átomo exacto de degenerate2
- Cadena de implicaciones en los cuatro cuadrantes relevantes
"""

import numpy as np
import pytest

from src.core.exceptions import InvalidArgumentError
from src.models.spaces import TimeGrid
from src.services.density import (
    BlowUpFractionError,
    GriddingRefusedError,
    KdeGrid,
    atom_test,
    implication_chain,
    kde,
    kde_ladder,
    l1_discrepancy,
    monte_carlo,
    silverman_bandwidth,
    verdict,
)
from src.services.model_zoo import polynomial_model


class TestMonteCarlo:
    """Tests del muestreo de F·X_T."""

    def test_requires_minimum_samples(self, hypo3, tiny_grid):
        """Test 1: N < 100 lanza InvalidArgumentError"""
        # Act & Assert
        with pytest.raises(InvalidArgumentError, match="N debe ser >= 100"):
            monte_carlo(hypo3, np.eye(3), tiny_grid, N=50, master_seed=0)

    def test_degenerate_coordinate_is_constant(self, degenerate2, tiny_grid):
        """Test 2: en degenerate2 la segunda coordenada vale 1 en todas las muestras"""
        # Act
        sample_set = monte_carlo(degenerate2, [[0.0, 1.0]], tiny_grid, N=100, master_seed=3)

        # Assert
        assert sample_set.size == 100
        assert sample_set.k == 1
        assert sample_set.blowups == 0
        np.testing.assert_array_equal(sample_set.samples, 1.0)

    def test_deterministic_in_seed_and_workers(self, hypo3, tiny_grid):
        """Test 3: misma semilla da las mismas muestras con cualquier número de hilos"""
        # Act
        sequential = monte_carlo(hypo3, np.eye(3), tiny_grid, N=120, master_seed=8, workers=1)
        threaded = monte_carlo(hypo3, np.eye(3), tiny_grid, N=120, master_seed=8, workers=4)

        # Assert
        np.testing.assert_array_equal(sequential.samples, threaded.samples)

    def test_blowup_fraction_limit(self):
        """Test 4: si divergen todas las trayectorias se lanza BlowUpFractionError"""
        # Arrange
        model = polynomial_model(
            name="explosive",
            n=1,
            m=1,
            spectrum=[0.0],
            drift=[[(1.0, (3,))]],
            diffusion=[[[(0.0, (0,))]]],
            initial_x=[10.0],
        )

        # Act & Assert
        with pytest.raises(BlowUpFractionError) as exc_info:
            monte_carlo(model, [[1.0]], TimeGrid(T=1.0, steps=20), N=100, master_seed=0)

        assert exc_info.value.blowups == 100
        assert exc_info.value.total == 100


class TestKde:
    """Tests del estimador de núcleo."""

    @pytest.fixture
    def normal_samples(self, rng):
        return rng.standard_normal((20000, 1))

    def test_silverman_rule(self, rng):
        """Test 5: h = 0.9·min(σ, IQR/1.34)·N^(−1/5)"""
        # Arrange
        samples = rng.standard_normal((500, 2))
        std = samples.std(axis=0, ddof=1)
        q75, q25 = np.percentile(samples, [75, 25], axis=0)
        expected = 0.9 * np.minimum(std, (q75 - q25) / 1.34) * 500 ** (-0.2)

        # Act
        h = silverman_bandwidth(samples)

        # Assert
        np.testing.assert_allclose(h, expected, rtol=1e-12)

    def test_silverman_floor_for_constant_samples(self):
        """Test 6: muestras constantes usan el piso 1e-6·max(1, |media|)"""
        # Act
        h = silverman_bandwidth(np.full((200, 1), 4.0))

        # Assert
        np.testing.assert_allclose(h, [4e-6])

    def test_standard_normal_at_zero(self, normal_samples):
        """Test 7: la KDE de 20000 normales estándar vale ≈ 0.399 en 0"""
        # Arrange
        h = silverman_bandwidth(normal_samples)
        grid = KdeGrid.around(normal_samples, h)

        # Act
        density = kde(normal_samples, h, grid)

        # Assert
        at_zero = density[np.argmin(np.abs(grid.axes[0]))]
        assert 0.38 <= at_zero <= 0.42

    def test_ladder_normalization(self, normal_samples):
        """Test 8: cada KDE de la escalera integra 1 a 1e-3 y la discrepancia es pequeña"""
        # Act
        ladder = kde_ladder(normal_samples)

        # Assert
        assert len(ladder.bandwidths) == 3
        assert not ladder.marginal
        np.testing.assert_allclose(ladder.normalization, 1.0, atol=1e-3)
        assert ladder.l1_discrepancy < 0.1

    def test_two_dimensional_normalization(self, rng):
        """Test 9: en k = 2 la KDE producto también integra 1"""
        # Arrange
        samples = rng.standard_normal((2000, 2)) @ np.array([[1.0, 0.3], [0.0, 0.5]])

        # Act
        ladder = kde_ladder(samples)

        # Assert
        np.testing.assert_allclose(ladder.normalization, 1.0, atol=1e-3)

    def test_marginals_above_two_dimensions(self, rng):
        """Test 10: k = 3 usa las marginales 1D"""
        # Act
        ladder = kde_ladder(rng.standard_normal((1000, 3)))

        # Assert
        assert ladder.marginal
        assert len(ladder.l1_ladder) == 2
        np.testing.assert_allclose(ladder.normalization, 1.0, atol=1e-3)

    def test_gridding_refused(self, rng):
        """Test 11: KdeGrid y kde rechazan k > 2"""
        # Arrange
        samples = rng.standard_normal((100, 3))

        # Act & Assert
        with pytest.raises(GriddingRefusedError, match="k=3"):
            KdeGrid.around(samples, np.ones(3))
        with pytest.raises(GriddingRefusedError):
            kde(samples, 1.0, KdeGrid(axes=(np.linspace(0, 1, 5),)))

    def test_rejects_non_positive_bandwidth(self, rng):
        """Test 12: bandwidth <= 0 lanza InvalidArgumentError"""
        # Arrange
        samples = rng.standard_normal((100, 1))

        # Act & Assert
        with pytest.raises(InvalidArgumentError, match="bandwidth"):
            kde(samples, 0.0, KdeGrid(axes=(np.linspace(-1, 1, 11),)))

    def test_point_mass_kernel(self):
        """Test 13: 100 muestras en 0 con h = 0.5 dan φ(0)/0.5 en el centro"""
        # Arrange
        grid = KdeGrid(axes=(np.linspace(-5, 5, 1001),))

        # Act
        density = kde(np.zeros((100, 1)), 0.5, grid)

        # Assert
        assert density.max() == pytest.approx(0.7978845608028654, rel=1e-12)

    def test_l1_of_identical_bandwidths(self, rng):
        """Test 14: la discrepancia de una KDE consigo misma es 0"""
        # Arrange
        samples = rng.standard_normal((300, 1))
        h = silverman_bandwidth(samples)
        grid = KdeGrid.around(samples, h)

        # Assert
        assert l1_discrepancy(samples, h, h, grid) == 0.0

    def test_grid_integration(self):
        """Test 15: el trapecio integra la constante 1 sobre [0, 2] × [0, 3]"""
        # Arrange
        grid = KdeGrid(axes=(np.linspace(0.0, 2.0, 5), np.linspace(0.0, 3.0, 7)))

        # Assert
        assert grid.integrate(np.ones(grid.shape)) == pytest.approx(6.0)


class TestAtoms:
    """Tests del detector de átomos."""

    def test_detects_synthetic_atom(self, rng):
        """Test 16: un 10% de muestras en 2.0 es un átomo"""
        # Arrange
        samples = np.concatenate([rng.standard_normal(900), np.full(100, 2.0)])[:, None]

        # Act
        flag, locations = atom_test(samples)

        # Assert
        assert flag
        assert len(locations) == 1
        np.testing.assert_array_equal(locations[0], [2.0])

    def test_continuous_sample_has_no_atoms(self, rng):
        """Test 17: muestras normales no tienen átomos"""
        # Act
        flag, locations = atom_test(rng.standard_normal((1000, 2)))

        # Assert
        assert not flag
        assert locations == []

    def test_constant_sample_is_one_atom(self):
        """Test 18: muestras constantes son un único átomo aunque la dispersión sea 0"""
        # Act
        flag, locations = atom_test(np.ones((100, 1)))

        # Assert
        assert flag
        assert len(locations) == 1

    def test_rejects_negative_tolerance(self):
        """Test 19: tol < 0 lanza InvalidArgumentError"""
        # Act & Assert
        with pytest.raises(InvalidArgumentError, match="tol"):
            atom_test(np.ones((10, 1)), tol=-1.0)


class TestVerdict:
    """Tests de la cadena de implicaciones y del veredicto."""

    def test_full_rank_and_stable_kde(self):
        """Test 20: rango completo, γ ≻ 0, sin átomos y KDE estable es consistente"""
        # Act
        expect, observed, text = implication_chain(3, 3, 1e-2, False, 0.05)

        # Assert
        assert expect and observed
        assert "expect density" in text
        assert "consistent with an absolutely continuous law" in text

    def test_deficient_rank_with_atom(self):
        """Test 21: rango deficiente y átomo no predicen ni observan densidad"""
        # Act
        expect, observed, text = implication_chain(1, 2, 0.0, True, 0.0)

        # Assert
        assert not expect and not observed
        assert "no density predicted" in text
        assert "atom detected" in text
        assert "rank deficient (1/2 at truncation)" in text

    def test_unstable_kde_is_not_observed(self):
        """Test 22: L¹ por encima del umbral no cuenta como densidad observada"""
        # Act
        expect, observed, text = implication_chain(2, 2, 1.0, False, 0.5)

        # Assert
        assert expect
        assert not observed
        assert "unstable" in text

    def test_degenerate2_verdict(self, degenerate2, tiny_grid):
        """Test 23: degenerate2 con F = (0, 1) no predice densidad y detecta el átomo"""
        # Act
        report = verdict(degenerate2, [[0.0, 1.0]], tiny_grid, N=100, depth=2, master_seed=0, gamma_paths=5)

        # Assert
        assert report.rank == 1
        assert report.atom_flag
        assert report.expect_density is False
        assert report.observed_density is False
        assert report.consistent is True
        assert report.gamma_spectrum_summary["max"] == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose(report.atom_locations, [[1.0]])

    def test_verdict_reuses_sample_set(self, degenerate2, tiny_grid):
        """Test 24: con sample_set dado se reutilizan las muestras"""
        # Arrange
        sample_set = monte_carlo(degenerate2, [[1.0, 0.0]], tiny_grid, N=200, master_seed=4)

        # Act
        report = verdict(
            degenerate2,
            [[1.0, 0.0]],
            tiny_grid,
            N=200,
            depth=1,
            master_seed=4,
            gamma_paths=3,
            sample_set=sample_set,
        )

        # Assert
        assert report.n_samples == 200
        np.testing.assert_allclose(report.sample_mean, sample_set.samples.mean(axis=0))
        assert not report.atom_flag
