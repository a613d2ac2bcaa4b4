"""
Muestreo Monte Carlo de ξ_T = F·X_T y diagnósticos de continuidad absoluta.

- monte_carlo: N trayectorias independientes (stream_id = 0…N−1).
- kde: estimador de núcleo gaussiano producto sobre una malla tensorial.
- atom_test: valores alcanzados por >= 5% de las muestras.
- verdict: rango de Hörmander + espectro de γ_T frente a KDE y átomos.

La ausencia de átomos junto con una KDE estable al reducir el ancho de banda
es evidencia compatible con una ley absolutamente continua, no una prueba.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import trapezoid
from scipy.spatial import cKDTree
from scipy.stats import iqr, norm

from src.core.config import settings
from src.core.exceptions import InvalidArgumentError, LabError
from src.core.logging_config import get_logger
from src.models.model_spec import ModelSpec
from src.models.paths import SampleSet
from src.models.spaces import TimeGrid
from src.schemas.reports import DensityReport
from src.services.lie_hormander import Variant, hormander_rank
from src.services.malliavin import check_functional, gamma_spectrum
from src.services.sde_solver import BlowUpError, sample_brownian, solve_mild
from src.services.variation_flow import FormulationChoice
from src.tasks.path_pool import map_paths

logger = get_logger(__name__)

MIN_SAMPLES = 100
BANDWIDTH_LADDER = (1.0, 0.5, 0.25)
GRID_EXTENSION = 5.0
MAX_AXIS_POINTS = 16384
MAX_AXIS_POINTS_2D = 1024
SAMPLE_CHUNK = 4096


# ==================== EXCEPCIONES PERSONALIZADAS ====================


class BlowUpFractionError(LabError):
    """Demasiadas trayectorias divergentes para un muestreo fiable."""

    def __init__(self, blowups: int, total: int, limit: float):
        self.blowups = blowups
        self.total = total
        self.limit = limit
        super().__init__(f"{blowups}/{total} trayectorias divergieron (límite {limit:.2%})")


class GriddingRefusedError(LabError):
    """La KDE en malla solo se ofrece para k <= 2."""

    def __init__(self, k: int):
        self.k = k
        super().__init__(f"KDE en malla rechazada para k={k} > 2; usar momentos o marginales")


# ==================== MUESTREO ====================


def monte_carlo(
    model: ModelSpec,
    F: NDArray[np.float64] | list[list[float]],
    grid: TimeGrid,
    N: int,
    master_seed: int,
    workers: int | None = None,
) -> SampleSet:
    """
    N muestras de F·X_T, deterministas en master_seed.

    Args:
        model: Modelo.
        F: Funcional lineal k×n de rango k.
        grid: Malla temporal.
        N: Trayectorias (>= 100).
        master_seed: Semilla maestra.
        workers: Hilos del pool.

    Returns:
        SampleSet sin las trayectorias divergentes (contadas en blowups).

    Raises:
        BlowUpFractionError: Si diverge más de settings.BLOWUP_FRACTION_LIMIT.
    """
    if N < MIN_SAMPLES:
        raise InvalidArgumentError(f"N debe ser >= {MIN_SAMPLES}")
    functional = check_functional(F, model.n)

    def run_path(stream_id: int) -> NDArray[np.float64] | None:
        path = sample_brownian(master_seed, stream_id, grid, model.m)
        try:
            return functional @ solve_mild(model, path).terminal
        except BlowUpError:
            return None

    results = map_paths(run_path, range(N), workers)
    kept = [row for row in results if row is not None]
    blowups = N - len(kept)
    if blowups > settings.BLOWUP_FRACTION_LIMIT * N:
        raise BlowUpFractionError(blowups, N, settings.BLOWUP_FRACTION_LIMIT)

    samples = np.array(kept).reshape(len(kept), functional.shape[0])
    logger.info("monte_carlo_completed", model=model.name, samples=len(kept), blowups=blowups)
    return SampleSet(
        samples=samples,
        master_seed=master_seed,
        model_name=model.name,
        functional=functional,
        blowups=blowups,
    )


# ==================== KDE ====================


def _as_samples(data: SampleSet | NDArray[np.float64]) -> NDArray[np.float64]:
    samples = data.samples if isinstance(data, SampleSet) else np.asarray(data, dtype=float)
    return samples.reshape(samples.shape[0], -1)


def silverman_bandwidth(data: SampleSet | NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Regla de Silverman por coordenada: h = 0.9·min(σ, IQR/1.34)·N^(−1/5).

    Si IQR = 0 se usa σ; si además σ = 0 se usa un piso 1e-6·max(1, |media|).
    """
    samples = _as_samples(data)
    n_samples = samples.shape[0]
    std = samples.std(axis=0, ddof=1) if n_samples > 1 else np.zeros(samples.shape[1])
    quartile_range = iqr(samples, axis=0)
    spread = np.where(quartile_range > 0, np.minimum(std, quartile_range / 1.34), std)
    floor = 1e-6 * np.maximum(1.0, np.abs(samples.mean(axis=0)))
    return np.where(spread > 0, 0.9 * spread * n_samples ** (-0.2), floor)


@dataclass(frozen=True)
class KdeGrid:
    """
    Malla tensorial para evaluar la KDE (k = 1 o 2 ejes).

    Attributes:
        axes: Nodos de cada eje.
    """

    axes: tuple[NDArray[np.float64], ...]

    @classmethod
    def around(
        cls, data: SampleSet | NDArray[np.float64], bandwidth: NDArray[np.float64]
    ) -> "KdeGrid":
        """
        Malla [min − 5h, max + 5h] por coordenada.

        El número de nodos parte de settings.KDE_GRID_POINTS (k = 1) o
        KDE_GRID_POINTS_2D (k = 2) y se aumenta hasta que el espaciado no
        supere h_min/6, para que la regla del trapecio integre la KDE más
        fina de la escalera sin sesgo apreciable.
        """
        samples = _as_samples(data)
        k = samples.shape[1]
        if k > 2:
            raise GriddingRefusedError(k)
        base = settings.KDE_GRID_POINTS if k == 1 else settings.KDE_GRID_POINTS_2D
        cap = MAX_AXIS_POINTS if k == 1 else MAX_AXIS_POINTS_2D
        h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (k,))
        axes = []
        for d in range(k):
            low = samples[:, d].min() - GRID_EXTENSION * h[d]
            high = samples[:, d].max() + GRID_EXTENSION * h[d]
            needed = math.ceil((high - low) / (h[d] * BANDWIDTH_LADDER[-1] / 1.5)) + 1
            axes.append(np.linspace(low, high, min(max(base, needed), cap)))
        return cls(axes=tuple(axes))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(axis.size for axis in self.axes)

    def integrate(self, values: NDArray[np.float64]) -> float:
        """Trapecio sobre todos los ejes."""
        if values.size == 0:
            return 0.0
        result = values
        for axis in reversed(self.axes):
            result = trapezoid(result, axis, axis=-1)
        return float(result)


def kde(
    data: SampleSet | NDArray[np.float64],
    bandwidth: float | NDArray[np.float64],
    grid: KdeGrid,
) -> NDArray[np.float64]:
    """
    KDE gaussiana producto evaluada en la malla.

    El núcleo es separable, de modo que en 2D la densidad es (1/N)·K₁ᵀK₂
    con K_d[i, g] = φ_h((g − x_id)/h_d)/h_d; las muestras se procesan en
    bloques para acotar memoria.

    Args:
        data: Muestras N×k (k <= 2).
        bandwidth: Ancho de banda escalar o por coordenada (> 0).
        grid: Malla con k ejes.

    Returns:
        Array con la forma de la malla.

    Raises:
        GriddingRefusedError: Si k > 2.

    Example:
        >>> grid = KdeGrid(axes=(np.linspace(-5, 5, 1001),))
        >>> kde(np.zeros((100, 1)), 0.5, grid).max()  # φ(0)/0.5
        0.7978845608028654
    """
    samples = _as_samples(data)
    n_samples, k = samples.shape
    if k > 2:
        raise GriddingRefusedError(k)
    if len(grid.axes) != k:
        raise InvalidArgumentError(f"La malla tiene {len(grid.axes)} ejes y las muestras k={k}")
    h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (k,))
    if np.any(h <= 0):
        raise InvalidArgumentError("bandwidth debe ser > 0")
    if any(axis.size == 0 for axis in grid.axes):
        return np.zeros(grid.shape)

    density = np.zeros(grid.shape)
    for start in range(0, n_samples, SAMPLE_CHUNK):
        block = samples[start : start + SAMPLE_CHUNK]
        kernels = [
            norm.pdf((grid.axes[d][None, :] - block[:, d][:, None]) / h[d]) / h[d] for d in range(k)
        ]
        if k == 1:
            density += kernels[0].sum(axis=0)
        else:
            density += kernels[0].T @ kernels[1]
    return density / n_samples


def l1_discrepancy(
    data: SampleSet | NDArray[np.float64],
    first: NDArray[np.float64],
    second: NDArray[np.float64],
    grid: KdeGrid,
) -> float:
    """∫|f_first − f_second| en la malla."""
    return grid.integrate(np.abs(kde(data, first, grid) - kde(data, second, grid)))


@dataclass(frozen=True)
class KdeLadder:
    """Resultado de la escalera de anchos de banda."""

    bandwidths: list[NDArray[np.float64]]
    normalization: list[float]
    l1_ladder: list[float]
    marginal: bool

    @property
    def l1_discrepancy(self) -> float:
        return self.l1_ladder[0]


def _ladder_on(samples: NDArray[np.float64], h0: NDArray[np.float64]) -> tuple[list[float], list[float]]:
    bandwidths = [h0 * factor for factor in BANDWIDTH_LADDER]
    grid = KdeGrid.around(samples, h0)
    curves = [kde(samples, h, grid) for h in bandwidths]
    normalization = [grid.integrate(curve) for curve in curves]
    l1 = [grid.integrate(np.abs(a - b)) for a, b in zip(curves, curves[1:])]
    return normalization, l1


def kde_ladder(data: SampleSet | NDArray[np.float64]) -> KdeLadder:
    """
    KDE con h0 (Silverman), h0/2 y h0/4 y sus discrepancias L¹.

    Para k > 2 se usan las k marginales 1D: la discrepancia es el máximo
    y la normalización el peor caso por escalón.
    """
    samples = _as_samples(data)
    h0 = silverman_bandwidth(samples)
    bandwidths = [h0 * factor for factor in BANDWIDTH_LADDER]

    if samples.shape[1] <= 2:
        normalization, l1 = _ladder_on(samples, h0)
        return KdeLadder(bandwidths=bandwidths, normalization=normalization, l1_ladder=l1, marginal=False)

    per_coordinate = [_ladder_on(samples[:, [d]], h0[[d]]) for d in range(samples.shape[1])]
    normalization = [
        max((values[0][i] for values in per_coordinate), key=lambda mass: abs(mass - 1.0))
        for i in range(len(BANDWIDTH_LADDER))
    ]
    l1 = [max(values[1][i] for values in per_coordinate) for i in range(len(BANDWIDTH_LADDER) - 1)]
    return KdeLadder(bandwidths=bandwidths, normalization=normalization, l1_ladder=l1, marginal=True)


# ==================== ÁTOMOS ====================


def atom_test(
    data: SampleSet | NDArray[np.float64], tol: float | None = None
) -> tuple[bool, list[NDArray[np.float64]]]:
    """
    Detecta valores alcanzados por >= settings.ATOM_FRACTION de las muestras.

    Dos muestras coinciden si su distancia (norma del máximo) es <= tol·spread,
    con spread la mayor amplitud por coordenada.

    Args:
        data: Muestras N×k.
        tol: Tolerancia relativa (None = settings.ATOM_TOLERANCE).

    Returns:
        (flag, locations) con las ubicaciones ordenadas por frecuencia.
    """
    samples = _as_samples(data)
    n_samples = samples.shape[0]
    if n_samples == 0:
        return False, []
    tolerance = settings.ATOM_TOLERANCE if tol is None else tol
    if tolerance < 0:
        raise InvalidArgumentError("tol debe ser >= 0")

    spread = float(np.max(np.ptp(samples, axis=0)))
    radius = tolerance * spread
    tree = cKDTree(samples)
    counts = np.asarray(tree.query_ball_point(samples, r=radius, p=np.inf, return_length=True))
    threshold = settings.ATOM_FRACTION * n_samples

    locations: list[NDArray[np.float64]] = []
    for index in np.argsort(-counts, kind="stable"):
        if counts[index] < threshold:
            break
        candidate = samples[index]
        if any(np.max(np.abs(candidate - known)) <= radius for known in locations):
            continue
        locations.append(candidate.copy())

    return bool(locations), locations


# ==================== VEREDICTO ====================


def _quantiles(values: NDArray[np.float64]) -> dict[str, float]:
    if values.size == 0:
        return {}
    q = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {"min": float(q[0]), "q25": float(q[1]), "median": float(q[2]), "q75": float(q[3]), "max": float(q[4])}


def implication_chain(
    rank: int, n: int, gamma_median: float, atom_flag: bool, l1: float
) -> tuple[bool, bool, str]:
    """
    (expect, observed, texto) de la cadena rango ∧ γ_T ≻ 0 ⇒ densidad.
    """
    full_rank = rank == n
    gamma_positive = gamma_median > settings.GAMMA_THRESHOLD
    expect = full_rank and gamma_positive
    stable = l1 <= settings.KDE_L1_THRESHOLD
    observed = (not atom_flag) and stable

    theory = (
        f"rank {'full' if full_rank else 'deficient'} ({rank}/{n} at truncation) ∧ "
        f"γ_T {'≻ 0' if gamma_positive else 'degenerate'} (median min-eig {gamma_median:.3e}) "
        f"⇒ {'expect density' if expect else 'no density predicted'}"
    )
    evidence = (
        f"observed: {'atom detected' if atom_flag else 'no atoms'}, "
        f"KDE L1(h0, h0/2) = {l1:.3e} ({'stable' if stable else 'unstable'}) "
        f"⇒ {'consistent with' if observed else 'inconsistent with'} an absolutely continuous law"
    )
    return expect, observed, f"{theory}; {evidence}"


def verdict(
    model: ModelSpec,
    F: NDArray[np.float64] | list[list[float]],
    grid: TimeGrid,
    N: int,
    depth: int,
    master_seed: int,
    gamma_paths: int = 100,
    workers: int | None = None,
    formulation: FormulationChoice = "auto",
    variant: Variant = "corrected",
    sample_set: SampleSet | None = None,
) -> DensityReport:
    """
    Reúne rango de Hörmander, espectro de γ_T, KDE y átomos.

    Args:
        model: Modelo.
        F: Funcional k×n.
        grid: Malla temporal.
        N: Muestras para la KDE.
        depth: Profundidad de corchetes.
        master_seed: Semilla maestra (γ_T usa master_seed + 1).
        gamma_paths: Trayectorias para el espectro de γ_T.
        workers: Hilos del pool.
        formulation: Formulación de Z.
        variant: Familia de generadores.
        sample_set: Muestras ya simuladas con (master_seed, N); None = simularlas.

    Returns:
        DensityReport con expect_density, observed_density y consistent.
    """
    functional = check_functional(F, model.n)
    span = hormander_rank(model, depth=depth, variant=variant)
    gammas = gamma_spectrum(model, functional, grid, gamma_paths, master_seed + 1, workers, formulation)
    summary = _quantiles(gammas)

    if sample_set is None:
        sample_set = monte_carlo(model, functional, grid, N, master_seed, workers)
    ladder = kde_ladder(sample_set)
    atom_flag, locations = atom_test(sample_set)

    expect, observed, chain = implication_chain(
        span.rank, model.n, summary.get("median", 0.0), atom_flag, ladder.l1_discrepancy
    )
    logger.info("density_verdict", model=model.name, expect=expect, observed=observed)

    samples = sample_set.samples
    covariance_eigenvalues = (
        np.linalg.eigvalsh(np.atleast_2d(np.cov(samples, rowvar=False))) if sample_set.size > 1 else np.zeros(0)
    )
    return DensityReport(
        n_samples=sample_set.size,
        blowups=sample_set.blowups,
        k=sample_set.k,
        bandwidths=ladder.bandwidths,
        l1_discrepancy=ladder.l1_discrepancy,
        l1_ladder=ladder.l1_ladder,
        normalization=ladder.normalization,
        marginal=ladder.marginal,
        atom_flag=atom_flag,
        atom_locations=locations,
        sample_mean=samples.mean(axis=0),
        covariance_eigenvalues=covariance_eigenvalues,
        rank=span.rank,
        gamma_spectrum_summary=summary,
        expect_density=expect,
        observed_density=observed,
        consistent=expect == observed,
        implication=chain,
    )
