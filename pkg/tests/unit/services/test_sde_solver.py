"""
Tests unitarios para el browniano, la solución mild y Picard.

Estrategia de testing:
- Reproducibilidad bit a bit por (seed, stream_id)
- Casos con solución exacta (deriva lineal sin ruido, ruido aditivo puro)
- Punto fijo del operador de Picard discreto
- Detección de divergencias con el nodo afectado
"""

import numpy as np
import pytest
from scipy.linalg import expm

from src.core.exceptions import DimensionMismatchError, InvalidArgumentError
from src.models.paths import BrownianPath
from src.models.spaces import TimeGrid
from src.services.density import monte_carlo
from src.services.model_zoo import LINEAR_GAUSS_DRIFT, LINEAR_GAUSS_SPECTRUM, polynomial_model
from src.services.sde_solver import (
    BlowUpError,
    coarsen_brownian,
    constant_candidate,
    picard_diagnostic,
    picard_map,
    sample_brownian,
    solve_mild,
    stream_generator,
)


class TestBrownian:
    """Tests de trayectorias brownianas."""

    def test_same_seed_same_increments(self, short_grid):
        """Test 1: (seed, stream_id) reproduce los incrementos bit a bit"""
        # Act
        first = sample_brownian(7, 3, short_grid, 2)
        second = sample_brownian(7, 3, short_grid, 2)

        # Assert
        np.testing.assert_array_equal(first.increments, second.increments)

    def test_streams_are_independent(self, short_grid):
        """Test 2: stream_id distintos producen incrementos distintos"""
        # Act
        first = sample_brownian(7, 0, short_grid, 1)
        second = sample_brownian(7, 1, short_grid, 1)

        # Assert
        assert not np.array_equal(first.increments, second.increments)

    def test_increment_variance(self):
        """Test 3: Var(ΔW) ≈ dt con 20000 incrementos"""
        # Arrange
        grid = TimeGrid(T=2.0, steps=20000)

        # Act
        path = sample_brownian(11, 0, grid, 1)

        # Assert
        assert path.increments.var() == pytest.approx(grid.dt, rel=0.05)
        assert path.increments.shape == (20000, 1)

    def test_coarsen_sums_blocks(self, short_grid):
        """Test 4: la trayectoria gruesa coincide con W fino en los nodos comunes"""
        # Arrange
        fine = sample_brownian(5, 2, short_grid, 3)

        # Act
        coarse = coarsen_brownian(fine, 4)

        # Assert
        assert coarse.grid.steps == 50
        np.testing.assert_allclose(coarse.values(), fine.values()[::4], atol=1e-14)
        assert coarse.stream_id == fine.stream_id

    def test_values_start_at_zero(self, tiny_grid):
        """Test 5: W_0 = 0"""
        # Act
        values = sample_brownian(1, 0, tiny_grid, 2).values()

        # Assert
        np.testing.assert_array_equal(values[0], [0.0, 0.0])
        assert values.shape == (51, 2)

    def test_stream_generator_matches_sample(self, tiny_grid):
        """Test 6: sample_brownian usa el generador de (seed, stream_id)"""
        # Arrange
        expected = stream_generator(3, 9).standard_normal((50, 1)) * np.sqrt(tiny_grid.dt)

        # Act
        path = sample_brownian(3, 9, tiny_grid, 1)

        # Assert
        np.testing.assert_array_equal(path.increments, expected)

    def test_path_rejects_wrong_shape(self, tiny_grid):
        """Test 7: incrementos con filas != steps lanzan DimensionMismatchError"""
        # Act & Assert
        with pytest.raises(DimensionMismatchError):
            BrownianPath(grid=tiny_grid, increments=np.zeros((10, 1)), seed=0, stream_id=0)


class TestSolveMild:
    """Tests del integrador de Euler exponencial."""

    def test_additive_noise_zero_drift_is_exact(self, degenerate2, short_grid):
        """Test 8: con A = 0, α = 0 y σ = e1, X_t = x + W_t·e1 exactamente"""
        # Arrange
        path = sample_brownian(0, 0, short_grid, 1)

        # Act
        X = solve_mild(degenerate2, path)

        # Assert
        np.testing.assert_allclose(X.states[:, 0], path.values()[:, 0], atol=1e-13)
        assert np.all(X.states[:, 1] == 1.0)

    def test_deterministic_linear_matches_semigroup(self, short_grid):
        """Test 9: dX = AX dt con σ = 0 reproduce exp(tA)x en cada nodo"""
        # Arrange
        model = polynomial_model(
            name="pure_semigroup",
            n=2,
            m=1,
            spectrum=[-1.0, -3.0],
            drift=[[], []],
            diffusion=[[[(0.0, (0, 0))], [(0.0, (0, 0))]]],
            initial_x=[1.0, 2.0],
        )
        path = sample_brownian(0, 0, short_grid, 1)

        # Act
        X = solve_mild(model, path)

        # Assert
        expected = np.array([1.0, 2.0]) * np.exp(np.outer(short_grid.nodes, [-1.0, -3.0]))
        np.testing.assert_allclose(X.states, expected, rtol=1e-12)

    def test_initial_state(self, heat_mult, tiny_grid):
        """Test 10: states[0] = initial_x y la forma es (N_t+1) × n"""
        # Act
        X = solve_mild(heat_mult, sample_brownian(0, 0, tiny_grid, heat_mult.m))

        # Assert
        np.testing.assert_array_equal(X.states[0], heat_mult.initial_x)
        assert X.states.shape == (51, 8)
        np.testing.assert_array_equal(X.terminal, X.states[-1])

    def test_dimension_mismatch(self, hypo3, tiny_grid):
        """Test 11: m del browniano distinto de m del modelo"""
        # Arrange
        path = sample_brownian(0, 0, tiny_grid, 2)

        # Act & Assert
        with pytest.raises(DimensionMismatchError):
            solve_mild(hypo3, path)

    def test_blowup_reports_node(self):
        """Test 12: deriva cúbica explosiva lanza BlowUpError con nodo y stream"""
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
        grid = TimeGrid(T=1.0, steps=20)
        path = sample_brownian(0, 4, grid, 1)

        # Act & Assert
        with pytest.raises(BlowUpError) as exc_info:
            solve_mild(model, path)

        assert exc_info.value.stream_id == 4
        assert 1 <= exc_info.value.node_index <= 20

    def test_linear_gauss_mean_matches_closed_form(self, linear_gauss):
        """Test 18: la media Monte Carlo de X_T en linear_gauss es exp(T(A+B))x₀ dentro de 3σ/√N"""
        # Arrange
        grid = TimeGrid(T=1.0, steps=200)
        N = 1000
        generator = np.diag(LINEAR_GAUSS_SPECTRUM) + np.array(LINEAR_GAUSS_DRIFT)
        exact = expm(grid.T * generator) @ linear_gauss.initial_x

        # Act
        samples = monte_carlo(linear_gauss, np.eye(4), grid, N=N, master_seed=11).samples

        # Assert
        assert samples.shape == (N, 4)
        spread = 3.0 * samples.std(axis=0, ddof=1) / np.sqrt(N)
        # El esquema exponencial introduce un sesgo O(dt) en la media
        assert np.all(np.abs(samples.mean(axis=0) - exact) <= spread + grid.dt)


class TestPicard:
    """Tests del operador de Picard discreto."""

    def test_solution_is_fixed_point(self, heat_mult, tiny_grid):
        """Test 13: Γ(X) = X para la solución del integrador"""
        # Arrange
        path = sample_brownian(2, 0, tiny_grid, heat_mult.m)
        X = solve_mild(heat_mult, path)

        # Act
        image = picard_map(heat_mult, X, path)

        # Assert
        np.testing.assert_allclose(image.states, X.states, rtol=1e-13, atol=1e-15)

    def test_first_iterate_from_constant(self, hypo3, tiny_grid):
        """Test 14: Γ(x) con x = 0 en hypo3 es el ruido integrado en la primera coordenada"""
        # Arrange
        path = sample_brownian(2, 0, tiny_grid, 1)
        candidate = constant_candidate(hypo3, tiny_grid, path)

        # Act
        image = picard_map(hypo3, candidate, path)

        # Assert
        np.testing.assert_allclose(image.states[:, 0], path.values()[:, 0], atol=1e-14)
        np.testing.assert_array_equal(image.states[:, 1:], 0.0)

    def test_diagnostic_decreases(self, heat_mult, tiny_grid):
        """Test 15: δ_k decrece estrictamente en heat_mult con T = 0.5"""
        # Act
        deltas = picard_diagnostic(heat_mult, tiny_grid, n_iter=5, n_paths=8, seed=1)

        # Assert
        assert len(deltas) == 5
        assert all(nxt < prev for prev, nxt in zip(deltas, deltas[1:]))

    def test_diagnostic_independent_of_workers(self, heat_mult, tiny_grid):
        """Test 16: el diagnóstico no depende del número de hilos"""
        # Act
        sequential = picard_diagnostic(heat_mult, tiny_grid, n_iter=3, n_paths=6, seed=4, workers=1)
        threaded = picard_diagnostic(heat_mult, tiny_grid, n_iter=3, n_paths=6, seed=4, workers=3)

        # Assert
        assert sequential == threaded

    def test_diagnostic_requires_two_iterations(self, heat_mult, tiny_grid):
        """Test 17: n_iter < 2 no permite estimar contracción"""
        # Act & Assert
        with pytest.raises(InvalidArgumentError, match="n_iter"):
            picard_diagnostic(heat_mult, tiny_grid, n_iter=1, n_paths=2, seed=0)
