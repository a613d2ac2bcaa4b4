"""
Trayectorias brownianas, integrador de la solución mild y diagnóstico de
contracción de Picard.

Esquema: Euler exponencial, X_{j+1} = exp(dt·A)·(X_j + α(X_j)·dt + σ(X_j)·ΔW_j).
El semigrupo se aplica al incremento completo, lo que respeta la forma mild
y es exacto en el caso lineal determinista.

Semillas: cada trayectoria usa un flujo PCG64 independiente derivado de
SeedSequence(seed, spawn_key=(stream_id,)); regenerar (seed, stream_id)
reproduce los incrementos bit a bit.
"""

import time
from collections.abc import Callable, Sequence

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, Field

from src.core.exceptions import DimensionMismatchError, InvalidArgumentError, LabError
from src.core.logging_config import get_logger
from src.core.metrics import get_metrics
from src.models.model_spec import ModelSpec
from src.models.paths import BrownianPath, SolutionPath
from src.models.spaces import Semigroup, TimeGrid
from src.tasks.path_pool import map_paths

logger = get_logger(__name__)
metrics = get_metrics()

StepOperator = Callable[[NDArray[np.float64]], NDArray[np.float64]]


# ==================== EXCEPCIONES PERSONALIZADAS ====================


class BlowUpError(LabError):
    """
    Estado no finito durante la integración.

    Attributes:
        node_index: Primer nodo con valores no finitos.
        stream_id: Trayectoria afectada.
    """

    def __init__(self, node_index: int, stream_id: int, what: str = "X"):
        self.node_index = node_index
        self.stream_id = stream_id
        self.what = what
        super().__init__(f"{what} no finito en el nodo {node_index} (stream_id={stream_id})")


# ==================== MODELOS PYDANTIC ====================


class StrongOrderResult(BaseModel):
    """Estudio de orden fuerte contra una referencia fina con el mismo ruido."""

    dts: list[float] = Field(..., description="Pasos estudiados (de mayor a menor)")
    rms_errors: list[float] = Field(..., description="Error RMS en ‖·‖_E de X_T por paso")
    slope: float = Field(..., description="Pendiente log-log del error frente a dt")
    reference_dt: float = Field(..., description="Paso de la trayectoria de referencia")
    n_paths: int = Field(..., description="Trayectorias usadas")


# ==================== BROWNIANO ====================


def stream_generator(seed: int, stream_id: int) -> np.random.Generator:
    """Generador independiente para (seed, stream_id)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream_id,))))


def sample_brownian(seed: int, stream_id: int, grid: TimeGrid, m: int) -> BrownianPath:
    """
    Incrementos i.i.d. N(0, dt) de un browniano m-dimensional.

    Args:
        seed: Semilla maestra (entero >= 0).
        stream_id: Índice de la trayectoria.
        grid: Malla temporal.
        m: Dimensión del ruido.

    Returns:
        BrownianPath determinista en (seed, stream_id).
    """
    rng = stream_generator(seed, stream_id)
    increments = rng.standard_normal((grid.steps, m)) * np.sqrt(grid.dt)
    return BrownianPath(grid=grid, increments=increments, seed=seed, stream_id=stream_id)


def coarsen_brownian(path: BrownianPath, factor: int) -> BrownianPath:
    """
    Agrega incrementos en bloques de factor pasos.

    La trayectoria gruesa es el mismo browniano observado en una malla con
    paso factor·dt, lo que permite estudios de refinamiento con ruido común.
    """
    if factor == 1:
        return path
    grid = path.grid.coarsened(factor)
    increments = path.increments.reshape(grid.steps, factor, path.m).sum(axis=1)
    return BrownianPath(grid=grid, increments=increments, seed=path.seed, stream_id=path.stream_id)


# ==================== INTEGRADOR ====================


def step_operator(sg: Semigroup, dt: float) -> StepOperator:
    """
    Aplicación de exp(dt·A) a vectores (n,) o a matrices (n, ...).

    En el tipo diagonal es un producto componente a componente.
    """
    if sg.is_diagonal:
        factors = sg.factors(dt)

        def apply_diagonal(value: NDArray[np.float64]) -> NDArray[np.float64]:
            if value.ndim == 1:
                return factors * value
            return factors.reshape((-1,) + (1,) * (value.ndim - 1)) * value

        return apply_diagonal

    exponential = sg.matrix(dt)

    def apply_dense(value: NDArray[np.float64]) -> NDArray[np.float64]:
        if value.ndim <= 2:
            return exponential @ value
        return np.tensordot(exponential, value, axes=(1, 0))

    return apply_dense


def _check_dimensions(model: ModelSpec, path: BrownianPath) -> None:
    if path.m != model.m:
        raise DimensionMismatchError("path.increments", (path.grid.steps, model.m), path.increments.shape)


def _euler_increment(
    model: ModelSpec, x: NDArray[np.float64], d_w: NDArray[np.float64], dt: float
) -> NDArray[np.float64]:
    return model.drift.eval(x) * dt + model.diffusion.assemble(x) @ d_w


def solve_mild(model: ModelSpec, path: BrownianPath) -> SolutionPath:
    """
    Integra la solución mild con Euler exponencial.

    Args:
        model: Modelo.
        path: Trayectoria browniana.

    Returns:
        SolutionPath con states[0] = initial_x.

    Raises:
        DimensionMismatchError: Si m del modelo y de la trayectoria difieren.
        BlowUpError: Con el primer nodo no finito.
    """
    _check_dimensions(model, path)
    grid = path.grid
    dt = grid.dt
    advance = step_operator(model.sg, dt)

    started = time.perf_counter()
    states = np.empty((grid.steps + 1, model.n))
    states[0] = model.initial_x
    for j in range(grid.steps):
        x = states[j]
        nxt = advance(x + _euler_increment(model, x, path.increments[j], dt))
        if not np.all(np.isfinite(nxt)):
            metrics.paths_simulated_total.labels(model=model.name, status="blowup").inc()
            metrics.path_blowups_total.labels(model=model.name).inc()
            logger.warning("path_blowup", model=model.name, stream_id=path.stream_id, node=j + 1)
            raise BlowUpError(node_index=j + 1, stream_id=path.stream_id)
        states[j + 1] = nxt

    metrics.paths_simulated_total.labels(model=model.name, status="completed").inc()
    metrics.path_solve_duration_seconds.labels(stage="mild").observe(time.perf_counter() - started)
    return SolutionPath(states=states, model=model, path=path)


# ==================== PICARD ====================


def picard_map(model: ModelSpec, candidate: SolutionPath, path: BrownianPath) -> SolutionPath:
    """
    Una aplicación del operador Γ discretizado.

    Γ(X)_{t_j} = exp(t_jA)x + Σ_{i<j} exp((t_j−t_i)A)(α(X_i)dt + σ(X_i)ΔW_i),
    evaluado por la recurrencia G_{j+1} = exp(dt·A)(G_j + α(X_j)dt + σ(X_j)ΔW_j)
    con G_0 = x. Con candidate = solve_mild(model, path) reproduce la solución.

    Raises:
        DimensionMismatchError: Si candidate no está en la malla de path.
        BlowUpError: Con el primer nodo no finito.
    """
    _check_dimensions(model, path)
    grid = path.grid
    if candidate.states.shape != (grid.steps + 1, model.n):
        raise DimensionMismatchError("candidate.states", (grid.steps + 1, model.n), candidate.states.shape)

    dt = grid.dt
    advance = step_operator(model.sg, dt)
    states = np.empty_like(candidate.states)
    states[0] = model.initial_x
    for j in range(grid.steps):
        increment = _euler_increment(model, candidate.states[j], path.increments[j], dt)
        nxt = advance(states[j] + increment)
        if not np.all(np.isfinite(nxt)):
            raise BlowUpError(node_index=j + 1, stream_id=path.stream_id, what="Γ(X)")
        states[j + 1] = nxt
    return SolutionPath(states=states, model=model, path=path)


def constant_candidate(model: ModelSpec, grid: TimeGrid, path: BrownianPath) -> SolutionPath:
    """Candidato X^{(0)} ≡ x."""
    states = np.tile(model.initial_x, (grid.steps + 1, 1))
    return SolutionPath(states=states, model=model, path=path)


def picard_diagnostic(
    model: ModelSpec,
    grid: TimeGrid,
    n_iter: int,
    n_paths: int,
    seed: int,
    workers: int | None = None,
) -> list[float]:
    """
    δ_k = sup_j E‖X^{(k+1)}_{t_j} − X^{(k)}_{t_j}‖²_E para k = 0…n_iter−1.

    Parte de X^{(0)} ≡ x y usa el mismo browniano para todas las iteraciones
    de una trayectoria (números aleatorios comunes).

    Args:
        model: Modelo.
        grid: Malla temporal.
        n_iter: Número de diferencias (>= 2).
        n_paths: Trayectorias Monte Carlo.
        seed: Semilla maestra.
        workers: Hilos del pool.

    Returns:
        Lista de n_iter valores δ_k.
    """
    if n_iter < 2:
        raise InvalidArgumentError("n_iter debe ser >= 2")
    weights = model.cfg.e_weights

    def run_path(stream_id: int) -> NDArray[np.float64]:
        path = sample_brownian(seed, stream_id, grid, model.m)
        current = constant_candidate(model, grid, path)
        gaps = np.empty((n_iter, grid.steps + 1))
        for k in range(n_iter):
            nxt = picard_map(model, current, path)
            gaps[k] = np.sum((weights * (nxt.states - current.states)) ** 2, axis=1)
            current = nxt
        return gaps

    per_path = map_paths(run_path, range(n_paths), workers)
    mean_gaps = np.sum(per_path, axis=0) / n_paths
    deltas = [float(value) for value in mean_gaps.max(axis=1)]

    logger.info("picard_diagnostic_completed", model=model.name, n_paths=n_paths, deltas=deltas)
    return deltas


# ==================== ORDEN FUERTE ====================


def strong_order_study(
    model: ModelSpec,
    T: float,
    exponents: Sequence[int] = (6, 7, 8, 9, 10),
    reference_factor: int = 64,
    n_paths: int = 32,
    seed: int = 0,
    workers: int | None = None,
) -> StrongOrderResult:
    """
    Pendiente log-log del error fuerte en X_T.

    Cada nivel dt = 2^{-e}·T se obtiene agregando los incrementos de una
    referencia con paso min(dt)/reference_factor.

    Returns:
        StrongOrderResult con errores RMS y pendiente ajustada.
    """
    exponents = sorted(exponents)
    finest = 2 ** exponents[-1] * reference_factor
    reference_grid = TimeGrid(T=T, steps=finest)
    weights = model.cfg.e_weights

    def run_path(stream_id: int) -> NDArray[np.float64]:
        fine = sample_brownian(seed, stream_id, reference_grid, model.m)
        reference = solve_mild(model, fine).terminal
        errors = np.empty(len(exponents))
        for index, exponent in enumerate(exponents):
            coarse = coarsen_brownian(fine, finest // 2**exponent)
            terminal = solve_mild(model, coarse).terminal
            errors[index] = np.sum((weights * (terminal - reference)) ** 2)
        return errors

    squared = np.sum(map_paths(run_path, range(n_paths), workers), axis=0) / n_paths
    rms = np.sqrt(squared)
    dts = np.array([T / 2**exponent for exponent in exponents])
    slope = float(np.polyfit(np.log(dts), np.log(rms), 1)[0])

    logger.info("strong_order_study_completed", model=model.name, slope=slope, n_paths=n_paths)
    return StrongOrderResult(
        dts=dts.tolist(),
        rms_errors=rms.tolist(),
        slope=slope,
        reference_dt=reference_grid.dt,
        n_paths=n_paths,
    )
