"""
Primera variación Y_t y su inverso a derecha Z_t.

Por paso de malla se linealizan los coeficientes en X_j:

    G_j = α'(X_j)·dt + Σ_k σ'_k(X_j)·ΔW_j^k
    H_j = (Σ(X_j) − α'(X_j))·dt − Σ_k σ'_k(X_j)·ΔW_j^k

y los flujos avanzan como

    Y_{j+1} = exp(dt·A)(Y_j + G_j·Y_j)
    P_{j+1} = P_j + exp(−t_jA)G_j exp(t_jA)·P_j          (conjugada)
    R_{j+1} = R_j + R_j·exp(−t_jA)H_j exp(t_jA)          (conjugada)
    Z_{j+1} = (Z_j + Z_j·H_j)·exp(−dt·A)                 (directa)

con Z_t = R_t·exp(−tA). Ambas formulaciones de Z coinciden salvo redondeo;
la conjugada necesita exp(−tA) acotado (overflow_cap) y la directa no.
El ruido actúa por la izquierda en Y y por la derecha en Z.
"""

import time
from dataclasses import replace
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from src.core.exceptions import DimensionMismatchError, InvalidArgumentError, LabError
from src.core.logging_config import get_logger
from src.core.metrics import get_metrics
from src.models.model_spec import ModelSpec
from src.models.paths import BrownianPath, FlowBundle, Formulation, SolutionPath
from src.models.spaces import OverflowCapError, SemigroupKindError, TimeGrid
from src.services.model_zoo import big_sigma
from src.services.sde_solver import BlowUpError, solve_mild, step_operator, stream_generator

logger = get_logger(__name__)
metrics = get_metrics()

FormulationChoice = Literal["auto", "conjugated", "direct"] | Formulation


# ==================== EXCEPCIONES PERSONALIZADAS ====================


class FormulationError(LabError):
    """
    La formulación pedida para Z no es aplicable al modelo.

    Attributes:
        formulation: Formulación solicitada.
        operation: Operación que la impide (p.ej. apply_inverse_semigroup).
    """

    def __init__(self, formulation: str, operation: str, reason: str):
        self.formulation = formulation
        self.operation = operation
        self.reason = reason
        super().__init__(f"Formulación '{formulation}' no aplicable ({operation}): {reason}")


# ==================== LINEALIZACIÓN ====================


def linearize(
    model: ModelSpec, X: SolutionPath, path: BrownianPath
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Pilas (N_t, n, n) de G_j y H_j a lo largo de X.

    G_j es el incremento de la ecuación linealizada (Y, D_rX); H_j el de Z.
    """
    steps = path.grid.steps
    if X.states.shape != (steps + 1, model.n):
        raise DimensionMismatchError("X.states", (steps + 1, model.n), X.states.shape)

    dt = path.grid.dt
    G = np.empty((steps, model.n, model.n))
    H = np.empty_like(G)
    for j in range(steps):
        x = X.states[j]
        drift_jacobian = model.drift.jacobian(x)
        noise = np.einsum("kij,k->ij", model.diffusion.jacobians(x), path.increments[j])
        G[j] = drift_jacobian * dt + noise
        H[j] = (big_sigma(model, x) - drift_jacobian) * dt - noise
    return G, H


def _ensure_finite(value: NDArray[np.float64], node: int, stream_id: int, what: str) -> None:
    if not np.all(np.isfinite(value)):
        logger.warning("flow_blowup", flow=what, node=node, stream_id=stream_id)
        raise BlowUpError(node_index=node, stream_id=stream_id, what=what)


# ==================== PRIMERA VARIACIÓN ====================


def solve_first_variation(model: ModelSpec, X: SolutionPath, path: BrownianPath) -> FlowBundle:
    """
    Integra Y_t por Euler exponencial sobre la solución X.

    Args:
        model: Modelo.
        X: Solución mild sobre path.
        path: Trayectoria browniana.

    Returns:
        FlowBundle con Y y V = Y − exp(tA); P, R y Z vacíos.

    Raises:
        BlowUpError: Si Y deja de ser finito.
    """
    G, _ = linearize(model, X, path)
    return _first_variation_from(model, path, G)


def _first_variation_from(model: ModelSpec, path: BrownianPath, G: NDArray[np.float64]) -> FlowBundle:
    grid = path.grid
    advance = step_operator(model.sg, grid.dt)
    n = model.n

    Y = np.empty((grid.steps + 1, n, n))
    Y[0] = np.eye(n)
    for j in range(grid.steps):
        Y[j + 1] = advance(Y[j] + G[j] @ Y[j])
        _ensure_finite(Y[j + 1], j + 1, path.stream_id, "Y")

    semigroup = np.stack([model.sg.matrix(t) for t in grid.nodes])
    return FlowBundle(Y=Y, V=Y - semigroup)


# ==================== INVERSO A DERECHA ====================


def _conjugated_flows(
    model: ModelSpec, grid: TimeGrid, G: NDArray[np.float64], H: NDArray[np.float64], stream_id: int
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    sg = model.sg
    if not sg.is_diagonal:
        raise SemigroupKindError("La formulación conjugada requiere un semigrupo diagonal")
    n = model.n
    nodes = grid.nodes
    sg.check_inverse_cap(float(nodes[-1]))

    P = np.empty((grid.steps + 1, n, n))
    R = np.empty_like(P)
    P[0] = R[0] = np.eye(n)
    for j in range(grid.steps):
        t = float(nodes[j])
        P[j + 1] = P[j] + sg.conjugate(t, G[j]) @ P[j]
        R[j + 1] = R[j] + R[j] @ sg.conjugate(t, H[j])
        _ensure_finite(R[j + 1], j + 1, stream_id, "R")

    inverse_factors = np.exp(-nodes[:, None] * sg.spectrum[None, :])
    Z = R * inverse_factors[:, None, :]
    return P, R, Z


def _direct_flows(
    model: ModelSpec, grid: TimeGrid, H: NDArray[np.float64], stream_id: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    n = model.n
    local_inverse = model.sg.local_inverse(grid.dt)

    Z = np.empty((grid.steps + 1, n, n))
    Z[0] = np.eye(n)
    for j in range(grid.steps):
        Z[j + 1] = (Z[j] + Z[j] @ H[j]) @ local_inverse
        _ensure_finite(Z[j + 1], j + 1, stream_id, "Z")

    R = np.stack([Z[j] @ model.sg.matrix(t) for j, t in enumerate(grid.nodes)])
    return R, Z


def solve_right_inverse(
    model: ModelSpec,
    X: SolutionPath,
    path: BrownianPath,
    formulation: FormulationChoice = "auto",
    first_variation: FlowBundle | None = None,
) -> FlowBundle:
    """
    Integra R_t, Z_t (y P_t en la formulación conjugada).

    Args:
        model: Modelo.
        X: Solución mild sobre path.
        path: Trayectoria browniana.
        formulation: "conjugated", "direct" o "auto" (conjugada con
            retroceso a la directa si exp(−tA) excede overflow_cap o el
            semigrupo es denso).
        first_variation: Parte Y ya calculada sobre el mismo camino.

    Returns:
        FlowBundle completo (Y, V, P, R, Z). P es None en la formulación directa.

    Raises:
        FormulationError: Si se pidió "conjugated" y no es aplicable.
        BlowUpError: Si algún flujo deja de ser finito.
    """
    choice = formulation.value if isinstance(formulation, Formulation) else formulation
    if choice not in ("auto", "conjugated", "direct"):
        raise InvalidArgumentError(f"Formulación desconocida: {formulation}")

    started = time.perf_counter()
    G, H = linearize(model, X, path)
    flows_y = first_variation if first_variation is not None else _first_variation_from(model, path, G)
    grid = path.grid

    P: NDArray[np.float64] | None = None
    used = Formulation.DIRECT
    if choice in ("auto", "conjugated"):
        try:
            P, R, Z = _conjugated_flows(model, grid, G, H, path.stream_id)
            used = Formulation.CONJUGATED
        except (OverflowCapError, SemigroupKindError) as exc:
            operation = getattr(exc, "operation", "apply_inverse_semigroup")
            if choice == "conjugated":
                raise FormulationError("conjugated", operation, str(exc)) from exc
            metrics.overflow_fallbacks_total.inc()
            logger.info(
                "formulation_fallback",
                model=model.name,
                stream_id=path.stream_id,
                reason=type(exc).__name__,
            )

    if used is Formulation.DIRECT:
        R, Z = _direct_flows(model, grid, H, path.stream_id)

    metrics.flow_solves_total.labels(formulation=used.value).inc()
    metrics.path_solve_duration_seconds.labels(stage="flows").observe(time.perf_counter() - started)
    return FlowBundle(Y=flows_y.Y, V=flows_y.V, P=P, R=R, Z=Z, formulation=used)


def solve_flows(
    model: ModelSpec, X: SolutionPath, path: BrownianPath, formulation: FormulationChoice = "auto"
) -> FlowBundle:
    """Y y Z sobre el mismo camino en una sola llamada."""
    return solve_right_inverse(model, X, path, formulation)


# ==================== RESIDUOS ====================


def residual_Q(bundle: FlowBundle) -> NDArray[np.float64]:
    """
    ‖P_tR_t − I‖_F en cada nodo.

    En la formulación directa (sin P) se usa ‖Y_tZ_t − I‖_F, que es la
    misma cantidad conjugada por exp(tA).

    Raises:
        InvalidArgumentError: Si el paquete no contiene Z.
    """
    if not bundle.is_complete:
        raise InvalidArgumentError("residual_Q requiere un FlowBundle completo")
    n = bundle.Y.shape[-1]
    if bundle.P is not None:
        product = bundle.P @ bundle.R
    else:
        product = bundle.Y @ bundle.Z
    return np.linalg.norm(product - np.eye(n), axis=(1, 2))


def range_inverse_defect(
    bundle: FlowBundle,
    model: ModelSpec,
    grid: TimeGrid,
    n_vectors: int = 8,
    seed: int = 0,
) -> float:
    """
    max_{j,v} ‖Y_tZ_t·exp(tA)v − exp(tA)v‖ / ‖exp(tA)v‖ con v aleatorios.

    Comprueba Y_tZ_t = I sobre el rango de exp(tA), que es lo único que
    afirma el inverso a derecha.
    """
    if not bundle.is_complete:
        raise InvalidArgumentError("range_inverse_defect requiere un FlowBundle completo")
    vectors = stream_generator(seed, 0).standard_normal((model.n, n_vectors))
    worst = 0.0
    for j, t in enumerate(grid.nodes):
        image = model.sg.matrix(float(t)) @ vectors
        norms = np.linalg.norm(image, axis=0)
        live = norms > 0
        if not np.any(live):
            continue
        defect = np.linalg.norm(bundle.Y[j] @ (bundle.Z[j] @ image) - image, axis=0)
        worst = max(worst, float(np.max(defect[live] / norms[live])))
    return worst


def smallest_singular_value(bundle: FlowBundle, index: int = -1) -> float:
    """Menor valor singular de Y en el nodo index (por defecto T)."""
    return float(np.linalg.svd(bundle.Y[index], compute_uv=False)[-1])


def finite_difference_flow(
    model: ModelSpec, path: BrownianPath, direction: NDArray[np.float64], epsilon: float
) -> NDArray[np.float64]:
    """
    (X_T(x + ε·h) − X_T(x)) / ε con el mismo browniano.

    Oráculo de la primera variación: debe aproximar Y_T·h.
    """
    base = solve_mild(model, path).terminal
    shifted = replace(model, initial_x=model.initial_x + epsilon * np.asarray(direction, dtype=float))
    return (solve_mild(shifted, path).terminal - base) / epsilon
