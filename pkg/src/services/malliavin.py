"""
Derivada de Malliavin D_rX_t, operador de covarianza C_t y matriz γ_t.

Dos vías para D_rX_t:
- sde: D_r = σ(X_r) y D_{j+1} = exp(dt·A)(D_j + G_j·D_j) para j >= r,
  el mismo paso de Euler exponencial que la primera variación.
- product: D_rX_t = Y_t·Z_r·σ(X_r).

La covarianza usa la regla de Riemann por la izquierda sobre la malla del
integrador:  C_t = Σ_{t_j < t} Z_jσ(X_j)σ(X_j)ᵀZ_jᵀ·dt.
"""

import time
from dataclasses import replace

import numpy as np
from numpy.typing import NDArray

from src.core.config import settings
from src.core.exceptions import (
    DimensionMismatchError,
    InvalidArgumentError,
    LabError,
    NonFiniteInputError,
)
from src.core.logging_config import get_logger
from src.core.metrics import get_metrics
from src.models.model_spec import ModelSpec
from src.models.paths import BrownianPath, FlowBundle, MalliavinBundle, MalliavinRoute, SolutionPath
from src.models.spaces import TimeGrid
from src.schemas.reports import CovarianceReport
from src.services.sde_solver import BlowUpError, sample_brownian, solve_mild, step_operator
from src.services.spaces_service import hs_norms
from src.services.variation_flow import FormulationChoice, linearize, solve_flows
from src.tasks.path_pool import map_paths

logger = get_logger(__name__)
metrics = get_metrics()

LEFT_RIEMANN = "left_riemann"


# ==================== EXCEPCIONES PERSONALIZADAS ====================


class RankDeficientFunctionalError(LabError):
    """
    F no tiene rango k.

    Attributes:
        rank: Rango numérico de F.
        k: Número de filas de F.
    """

    def __init__(self, rank: int, k: int):
        self.rank = rank
        self.k = k
        super().__init__(f"F tiene rango {rank} < k={k}; el funcional debe tener rango completo")


# ==================== HELPERS ====================


def _check_index(index: int, steps: int, what: str) -> None:
    if not 0 <= index <= steps:
        raise InvalidArgumentError(f"{what}={index} fuera de la malla [0, {steps}]")


def _diffusion_stack(model: ModelSpec, X: SolutionPath) -> NDArray[np.float64]:
    """σ(X_j) en cada nodo, (N_t+1) × n × m."""
    return np.stack([model.diffusion.assemble(x) for x in X.states])


def _functional_for(F: NDArray[np.float64] | list[list[float]], bundle: MalliavinBundle) -> NDArray[np.float64]:
    functional = np.atleast_2d(np.asarray(F, dtype=float))
    if functional.shape[1] != bundle.D.shape[1]:
        raise DimensionMismatchError("F", (functional.shape[0], bundle.D.shape[1]), functional.shape)
    return functional


def check_functional(F: NDArray[np.float64] | list[list[float]], n: int) -> NDArray[np.float64]:
    """
    Valida F (k×n, rango k) por valores singulares.

    Raises:
        DimensionMismatchError: Si F no tiene n columnas.
        RankDeficientFunctionalError: Si rank(F) < k.
    """
    functional = np.atleast_2d(np.asarray(F, dtype=float))
    if functional.ndim != 2 or functional.shape[1] != n:
        raise DimensionMismatchError("F", (functional.shape[0], n), functional.shape)
    if not np.all(np.isfinite(functional)):
        raise NonFiniteInputError("F")
    singular_values = np.linalg.svd(functional, compute_uv=False)
    top = singular_values[0] if singular_values.size else 0.0
    rank = int(np.sum(singular_values > settings.RANK_TOLERANCE * max(top, 1.0)))
    if rank < functional.shape[0]:
        raise RankDeficientFunctionalError(rank=rank, k=functional.shape[0])
    return functional


# ==================== DERIVADA DE MALLIAVIN ====================


def solve_malliavin_sde(
    model: ModelSpec, X: SolutionPath, path: BrownianPath, r_index: int
) -> MalliavinBundle:
    """
    D_rX_t por la ecuación lineal que satisface en t.

    Args:
        model: Modelo.
        X: Solución mild sobre path.
        path: Trayectoria browniana.
        r_index: Índice de r en la malla.

    Returns:
        MalliavinBundle con D de forma (N_t+1) × n × m; D ≡ 0 para t < r.

    Raises:
        BlowUpError: Si D deja de ser finito.
    """
    grid = path.grid
    _check_index(r_index, grid.steps, "r_index")
    started = time.perf_counter()
    G, _ = linearize(model, X, path)
    advance = step_operator(model.sg, grid.dt)

    D = np.zeros((grid.steps + 1, model.n, model.m))
    D[r_index] = model.diffusion.assemble(X.states[r_index])
    for j in range(r_index, grid.steps):
        D[j + 1] = advance(D[j] + G[j] @ D[j])
        if not np.all(np.isfinite(D[j + 1])):
            raise BlowUpError(node_index=j + 1, stream_id=path.stream_id, what="D_rX")

    metrics.path_solve_duration_seconds.labels(stage="malliavin").observe(time.perf_counter() - started)

    return MalliavinBundle(r_index=r_index, D=D, route=MalliavinRoute.SDE)


def product_formula(flows: FlowBundle, X: SolutionPath, r_index: int, t_index: int) -> NDArray[np.float64]:
    """
    Y_t·Z_r·σ(X_r); matriz cero si r > t.

    Example:
        >>> product_formula(flows, X, r_index=5, t_index=3)  # r > t
        array([[0.]])
    """
    if not flows.is_complete:
        raise InvalidArgumentError("product_formula requiere Z")
    steps = flows.Y.shape[0] - 1
    _check_index(r_index, steps, "r_index")
    _check_index(t_index, steps, "t_index")
    sigma_r = X.model.diffusion.assemble(X.states[r_index])
    if r_index > t_index:
        return np.zeros_like(sigma_r)
    return flows.Y[t_index] @ (flows.Z[r_index] @ sigma_r)


def product_route(flows: FlowBundle, X: SolutionPath, r_index: int) -> MalliavinBundle:
    """D_rX_t por la fórmula de producto en todos los nodos."""
    steps = flows.Y.shape[0] - 1
    _check_index(r_index, steps, "r_index")
    anchor = flows.Z[r_index] @ X.model.diffusion.assemble(X.states[r_index])
    D = np.zeros((steps + 1, X.model.n, X.model.m))
    D[r_index:] = flows.Y[r_index:] @ anchor
    return MalliavinBundle(r_index=r_index, D=D, route=MalliavinRoute.PRODUCT)


def route_discrepancy(sde: MalliavinBundle, product: MalliavinBundle, t_index: int = -1) -> float:
    """‖D(sde) − D(product)‖_F / ‖D(product)‖_F en el nodo t_index."""
    reference = np.linalg.norm(product.D[t_index])
    gap = np.linalg.norm(sde.D[t_index] - product.D[t_index])
    return float(gap / reference) if reference > 0 else float(gap)


def chain_rule_check(F: NDArray[np.float64], bundle: MalliavinBundle) -> float:
    """
    max_t ‖D_r(F·X_t) − F·D_rX_t‖ para F lineal, como comprobación algebraica.

    Contrae F con la pila completa de D y la compara con F aplicado nodo a
    nodo: solo valida la forma y el orden de ejes de la pila, por lo que es
    0 salvo redondeo. La comprobación numérica de la regla de la cadena es
    fd_chain_rule_check.
    """
    functional = _functional_for(F, bundle)
    contracted = np.tensordot(bundle.D, functional, axes=([1], [1])).transpose(0, 2, 1)
    worst = 0.0
    for j in range(bundle.D.shape[0]):
        worst = max(worst, float(np.linalg.norm(contracted[j] - functional @ bundle.D[j])))
    return worst


def malliavin_finite_difference(X: SolutionPath, r_index: int, epsilon: float) -> NDArray[np.float64]:
    """
    D_rX_t por diferencias centradas del integrador, sin usar G_j.

    La columna k es (X_t(X_r + εσ_k(X_r)) − X_t(X_r − εσ_k(X_r))) / 2ε,
    reintegrando desde el nodo r con los mismos incrementos brownianos.

    Returns:
        Pila (N_t+1) × n × m; cero para t < r.

    Raises:
        BlowUpError: Si alguna reintegración diverge.
    """
    path = X.path
    steps = path.grid.steps
    _check_index(r_index, steps, "r_index")
    if not epsilon > 0:
        raise InvalidArgumentError("epsilon debe ser > 0")
    model = X.model
    x_r = X.states[r_index]
    sigma_r = model.diffusion.assemble(x_r)

    D = np.zeros((steps + 1, model.n, model.m))
    if r_index == steps:
        D[r_index] = sigma_r
        return D

    remaining = steps - r_index
    tail = BrownianPath(
        grid=TimeGrid(T=path.grid.dt * remaining, steps=remaining),
        increments=path.increments[r_index:],
        seed=path.seed,
        stream_id=path.stream_id,
    )
    for k in range(model.m):
        shift = epsilon * sigma_r[:, k]
        plus = solve_mild(replace(model, initial_x=x_r + shift), tail).states
        minus = solve_mild(replace(model, initial_x=x_r - shift), tail).states
        D[r_index:, :, k] = (plus - minus) / (2.0 * epsilon)
    return D


def fd_chain_rule_check(
    F: NDArray[np.float64] | list[list[float]],
    bundle: MalliavinBundle,
    X: SolutionPath,
    epsilon: float,
) -> float:
    """
    Regla de la cadena frente a la perturbación del integrador.

    Compara D_r(F·X_t), obtenido por diferencias centradas de F·X_t al
    desplazar X_r a lo largo de σ_k(X_r), con F·D_rX_t de bundle.

    Returns:
        max_t ‖D_r(F·X_t) − F·D_rX_t‖_F / max_t ‖F·D_rX_t‖_F (absoluto si
        F·D ≡ 0).
    """
    functional = _functional_for(F, bundle)
    r = bundle.r_index
    numeric = np.einsum("ki,jil->jkl", functional, malliavin_finite_difference(X, r, epsilon)[r:])
    exact = np.einsum("ki,jil->jkl", functional, bundle.D[r:])
    gap = float(np.max(np.linalg.norm(numeric - exact, axis=(1, 2))))
    scale = float(np.max(np.linalg.norm(exact, axis=(1, 2))))
    return gap / scale if scale > 0 else gap


# ==================== COVARIANZA ====================


def covariance(
    model: ModelSpec,
    flows: FlowBundle,
    X: SolutionPath,
    F: NDArray[np.float64] | list[list[float]],
    quadrature: str = LEFT_RIEMANN,
    t_index: int | None = None,
) -> CovarianceReport:
    """
    C_t y γ_t = (F·Y_t)·C_t·(F·Y_t)ᵀ.

    Args:
        model: Modelo.
        flows: Flujos completos sobre el camino de X.
        X: Solución mild.
        F: Funcional lineal k×n de rango k.
        quadrature: Solo "left_riemann".
        t_index: Nodo de evaluación (None = T).

    Returns:
        CovarianceReport con C y gamma simétricas.

    Raises:
        RankDeficientFunctionalError: Si F no tiene rango k.
    """
    if quadrature != LEFT_RIEMANN:
        raise InvalidArgumentError(f"Cuadratura no soportada: {quadrature}")
    if not flows.is_complete:
        raise InvalidArgumentError("covariance requiere Z")
    functional = check_functional(F, model.n)
    steps = flows.Y.shape[0] - 1
    t = steps if t_index is None else t_index
    _check_index(t, steps, "t_index")

    dt = X.path.grid.dt
    B = flows.Z[:t] @ _diffusion_stack(model, X)[:t]
    C = np.einsum("jik,jlk->il", B, B) * dt
    C = 0.5 * (C + C.T)

    projected = functional @ flows.Y[t]
    gamma = projected @ C @ projected.T
    gamma = 0.5 * (gamma + gamma.T)
    min_eigenvalue = float(np.linalg.eigvalsh(gamma)[0])

    return CovarianceReport(
        F=functional,
        C=C,
        gamma=gamma,
        min_eigenvalue=min_eigenvalue,
        quadrature=quadrature,
        t_index=t,
    )


def quadratic_form(
    report: CovarianceReport, flows: FlowBundle, X: SolutionPath, phi: NDArray[np.float64]
) -> float:
    """
    Σ_j Σ_k ⟨Z_jσ_k(X_j), φ⟩²·dt con la misma cuadratura que C.

    Coincide con φᵀCφ salvo redondeo.
    """
    vector = np.asarray(phi, dtype=float)
    if vector.shape != (X.model.n,):
        raise DimensionMismatchError("phi", (X.model.n,), vector.shape)
    if not np.all(np.isfinite(vector)):
        raise NonFiniteInputError("phi")
    t = report.t_index
    B = flows.Z[:t] @ _diffusion_stack(X.model, X)[:t]
    pairings = np.einsum("jik,i->jk", B, vector)
    return float(np.sum(pairings**2) * X.path.grid.dt)


def malliavin_energy(model: ModelSpec, X: SolutionPath, flows: FlowBundle) -> float:
    """
    Σ_r ‖D_rX_T‖²_HS·dt por la vía de producto.

    Diagnóstico en malla de la norma de Malliavin de X_T.
    """
    steps = flows.Y.shape[0] - 1
    derivatives = flows.Y[-1] @ (flows.Z[:steps] @ _diffusion_stack(model, X)[:steps])
    return float(np.sum(hs_norms(model.cfg, derivatives) ** 2) * X.path.grid.dt)


def gamma_spectrum(
    model: ModelSpec,
    F: NDArray[np.float64] | list[list[float]],
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    workers: int | None = None,
    formulation: FormulationChoice = "auto",
) -> NDArray[np.float64]:
    """
    Menor autovalor de γ_T en cada una de n_paths trayectorias.

    Returns:
        Array de longitud n_paths en orden de stream_id.
    """
    functional = check_functional(F, model.n)

    def run_path(stream_id: int) -> float:
        path = sample_brownian(seed, stream_id, grid, model.m)
        X = solve_mild(model, path)
        flows = solve_flows(model, X, path, formulation)
        return covariance(model, flows, X, functional).min_eigenvalue

    values = np.array(map_paths(run_path, range(n_paths), workers))
    logger.info(
        "gamma_spectrum_completed",
        model=model.name,
        n_paths=n_paths,
        median_min_eigenvalue=float(np.median(values)) if values.size else None,
    )
    return values
