"""
Schema de configuración de experimentos (ExperimentConfig).

El fichero es JSON; las líneas cuyo primer carácter no blanco es '//' son
comentarios y se eliminan antes de parsear (conservando la numeración de
líneas). Los errores de sintaxis y de schema se reportan como ConfigError
con el número de línea del token o clave culpable.

Example:
    >>> config = load_config(Path("experiments/hypo3.json"))
    >>> model = build_model(config)
"""

import json
import re
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.core.exceptions import LabError
from src.models.model_spec import ModelSpec
from src.models.spaces import TimeGrid
from src.services.model_zoo import polynomial_model, zoo

_COMMENT_LINE = re.compile(r"^\s*//")


# ==================== EXCEPCIONES PERSONALIZADAS ====================


class ConfigError(LabError):
    """
    Configuración inválida.

    Attributes:
        line: Línea (1-based) del problema, si se pudo localizar.
        message: Descripción legible.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        prefix = f"línea {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


# ==================== MODELO POLINOMIAL ====================


class Monomial(BaseModel):
    """coeff·Π x_i^powers[i]."""

    model_config = ConfigDict(extra="forbid")

    coeff: float = Field(..., description="Coeficiente")
    powers: list[int] = Field(..., description="Potencias por coordenada (longitud n, grado <= 3)")


class PolynomialModelConfig(BaseModel):
    """Modelo de usuario con campos polinomiales de grado <= 3."""

    model_config = ConfigDict(extra="forbid")

    name: str = Field(default="polynomial", description="Identificador del modelo")
    n: int = Field(..., ge=1, le=64, description="Dimensión de estado")
    m: int = Field(..., ge=1, le=64, description="Dimensión del ruido")
    spectrum: list[float] | None = Field(default=None, description="Espectro diagonal de A (<= 0)")
    generator: list[list[float]] | None = Field(default=None, description="Matriz densa de A")
    drift: list[list[Monomial]] = Field(..., description="n componentes de α")
    diffusion: list[list[list[Monomial]]] = Field(..., description="m columnas de n componentes")
    initial_x: list[float] = Field(..., description="Condición inicial")
    e_weights: list[float] | None = Field(default=None, description="Pesos de E (n)")
    h_weights: list[float] | None = Field(default=None, description="Pesos de H (m)")
    embed_constant: float = Field(default=1.0, gt=0, description="Constante de inmersión")

    @model_validator(mode="after")
    def check_dimensions(self) -> "PolynomialModelConfig":
        n, m = self.n, self.m
        if (self.spectrum is None) == (self.generator is None):
            raise ValueError("definir exactamente uno de spectrum o generator")
        if self.spectrum is not None:
            if len(self.spectrum) != n:
                raise ValueError(f"spectrum debe tener {n} valores")
            if any(value > 0 for value in self.spectrum):
                raise ValueError("spectrum debe ser <= 0")
        if self.generator is not None and (len(self.generator) != n or any(len(row) != n for row in self.generator)):
            raise ValueError(f"generator debe ser {n}×{n}")
        if len(self.drift) != n:
            raise ValueError(f"drift debe tener {n} componentes")
        if len(self.diffusion) != m or any(len(column) != n for column in self.diffusion):
            raise ValueError(f"diffusion debe tener {m} columnas de {n} componentes")
        monomials = [mono for comp in self.drift for mono in comp]
        monomials += [mono for column in self.diffusion for comp in column for mono in comp]
        for mono in monomials:
            if len(mono.powers) != n or any(p < 0 for p in mono.powers) or sum(mono.powers) > 3:
                raise ValueError(f"monomio {mono.powers}: se esperan {n} potencias >= 0 con grado <= 3")
        if len(self.initial_x) != n:
            raise ValueError(f"initial_x debe tener {n} valores")
        if self.e_weights is not None and len(self.e_weights) != n:
            raise ValueError(f"e_weights debe tener {n} valores")
        if self.h_weights is not None and len(self.h_weights) != m:
            raise ValueError(f"h_weights debe tener {m} valores")
        return self


# ==================== SECCIONES ====================


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    T: float = Field(default=1.0, gt=0, description="Horizonte")
    steps: int = Field(default=1000, ge=1, description="Número de pasos")


class MonteCarloConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    paths: int = Field(default=10, ge=1, description="Trayectorias de simulate/flow-check/malliavin")
    density_samples: int = Field(default=1000, ge=100, description="Muestras de la KDE")
    gamma_paths: int = Field(default=100, ge=1, description="Trayectorias del espectro de γ_T")
    picard_paths: int = Field(default=50, ge=1, description="Trayectorias del diagnóstico de Picard")
    picard_iterations: int = Field(default=7, ge=2, description="Diferencias de Picard")


class FlowConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    formulation: Literal["auto", "conjugated", "direct"] = Field(default="auto", description="Formulación de Z")
    fd_epsilon: float = Field(default=1e-5, gt=0, description="ε del oráculo de diferencias finitas")
    fd_directions: int = Field(default=3, ge=1, description="Direcciones h del oráculo")
    refinement_levels: int = Field(default=3, ge=2, description="Niveles del estudio de refinamiento")


class MalliavinConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    r_fraction: float = Field(default=0.5, ge=0, le=1, description="r = r_fraction·T")
    intermediate_index: int | None = Field(default=None, ge=0, description="Nodo para la covarianza intermedia")


class TolerancesConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    fd_relative: float = Field(default=5e-3, gt=0)
    residual_q: float = Field(default=1e-3, gt=0)
    formulation_agreement: float = Field(default=1e-6, gt=0)
    route_relative: float = Field(default=1e-2, gt=0)
    quadratic_form: float = Field(default=1e-10, gt=0)
    chain_rule: float = Field(default=1e-12, gt=0)
    chain_rule_fd: float = Field(default=1e-6, gt=0)
    corrected_identity: float = Field(default=1e-8, gt=0)
    semimartingale: float = Field(default=5e-2, gt=0)
    kde_normalization: float = Field(default=1e-3, gt=0)
    require_monotone_refinement: bool = Field(default=True)
    expect_full_rank: bool | None = Field(default=None, description="Rango completo esperado (None = no comprobar)")


class ExperimentConfig(BaseModel):
    """Configuración completa de un experimento."""

    model_config = ConfigDict(extra="forbid")

    label: str = Field(default="default", pattern=r"^[A-Za-z0-9_.-]+$", description="Subdirectorio de salida")
    model: str | PolynomialModelConfig = Field(default="hypo3", description="Nombre del zoo o modelo polinomial")
    grid: GridConfig = Field(default_factory=GridConfig)
    seed: int = Field(default=20240601, ge=0, description="Semilla maestra")
    F: list[list[float]] | None = Field(default=None, description="Funcional k×n (None = identidad)")
    monte_carlo: MonteCarloConfig = Field(default_factory=MonteCarloConfig)
    bracket_depth: int = Field(default=2, ge=0, le=3, description="Profundidad de corchetes")
    bracket_variant: Literal["corrected", "classical"] = Field(default="corrected")
    flow: FlowConfig = Field(default_factory=FlowConfig)
    malliavin: MalliavinConfig = Field(default_factory=MalliavinConfig)
    tolerances: TolerancesConfig = Field(default_factory=TolerancesConfig)
    workers: int = Field(default=1, ge=1, description="Hilos del pool de trayectorias")
    output_dir: str = Field(default="runs", description="Directorio raíz de salida")

    @property
    def dt(self) -> float:
        return self.grid.T / self.grid.steps

    @property
    def model_name(self) -> str:
        return self.model if isinstance(self.model, str) else self.model.name


# ==================== CARGA ====================


def strip_comments(text: str) -> str:
    """Vacía las líneas de comentario '//' conservando la numeración."""
    return "\n".join("" if _COMMENT_LINE.match(line) else line for line in text.splitlines())


def _locate(text: str, loc: tuple[int | str, ...]) -> int | None:
    """Línea de la última clave de loc presente en el texto."""
    position = 0
    line = None
    for key in loc:
        if not isinstance(key, str):
            continue
        found = text.find(f'"{key}"', position)
        if found < 0:
            continue
        position = found
        line = text.count("\n", 0, found) + 1
    return line


def _primary_error(exc: ValidationError) -> tuple[tuple[int | str, ...], str]:
    """
    Error más informativo de una validación.

    En la unión str | PolynomialModelConfig pydantic reporta también el fallo
    de la rama str; se prefiere un error que no sea de tipo.
    """
    errors = exc.errors()
    chosen = next((error for error in errors if not error["type"].endswith("_type")), errors[0])
    loc = tuple(part for part in chosen["loc"] if part not in ("str", "PolynomialModelConfig"))
    return loc, chosen["msg"]


def is_manifest(data: Any) -> bool:
    """manifest.json de una ejecución: la configuración efectiva va en "config"."""
    return isinstance(data, dict) and isinstance(data.get("config"), dict) and "command" in data


def parse_config(text: str) -> ExperimentConfig:
    """
    Parsea y valida el texto de una configuración.

    Acepta también un manifest.json y valida solo su clave "config", de modo
    que `--config <dir>/manifest.json` repite la ejecución.

    Raises:
        ConfigError: Con la línea del error de sintaxis o de schema.
    """
    cleaned = strip_comments(text)
    try:
        data = json.loads(cleaned) if cleaned.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON inválido: {exc.msg}", line=exc.lineno) from None

    prefix: tuple[str, ...] = ()
    if is_manifest(data):
        data, prefix = data["config"], ("config",)

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        loc, message = _primary_error(exc)
        location = ".".join(str(part) for part in loc) or "<raíz>"
        raise ConfigError(f"{location}: {message}", line=_locate(cleaned, prefix + loc)) from None


def load_config(path: Path | None) -> ExperimentConfig:
    """Carga un fichero de configuración (None = valores por defecto)."""
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"No se pudo leer {path}: {exc.strerror}") from None
    return parse_config(text)


def apply_overrides(config: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    """
    Aplica los flags de la CLI sobre la configuración.

    Claves: seed, paths (monte_carlo.paths y density_samples), dt
    (steps = round(T/dt)), depth, outdir, workers. Los valores None se ignoran.
    """
    data = config.model_dump()
    if overrides.get("seed") is not None:
        data["seed"] = overrides["seed"]
    if overrides.get("paths") is not None:
        data["monte_carlo"]["paths"] = overrides["paths"]
        data["monte_carlo"]["density_samples"] = max(overrides["paths"], 100)
    if overrides.get("dt") is not None:
        data["grid"]["steps"] = max(1, round(data["grid"]["T"] / overrides["dt"]))
    if overrides.get("depth") is not None:
        data["bracket_depth"] = overrides["depth"]
    if overrides.get("outdir") is not None:
        data["output_dir"] = str(overrides["outdir"])
    if overrides.get("workers") is not None:
        data["workers"] = overrides["workers"]
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        loc, message = _primary_error(exc)
        raise ConfigError(f"{'.'.join(str(part) for part in loc)}: {message}") from None


# ==================== CONSTRUCCIÓN ====================


def build_model(config: ExperimentConfig) -> ModelSpec:
    """ModelSpec del zoo o del modelo polinomial."""
    spec = config.model
    if isinstance(spec, str):
        return zoo(spec)

    def monomials(component: list[Monomial]) -> list[tuple[float, list[int]]]:
        return [(mono.coeff, mono.powers) for mono in component]

    return polynomial_model(
        name=spec.name,
        n=spec.n,
        m=spec.m,
        drift=[monomials(component) for component in spec.drift],
        diffusion=[[monomials(component) for component in column] for column in spec.diffusion],
        initial_x=spec.initial_x,
        spectrum=spec.spectrum,
        generator=spec.generator,
        e_weights=spec.e_weights,
        h_weights=spec.h_weights,
        embed_constant=spec.embed_constant,
    )


def build_grid(config: ExperimentConfig) -> TimeGrid:
    return TimeGrid(T=config.grid.T, steps=config.grid.steps)


def build_functional(config: ExperimentConfig, n: int) -> np.ndarray:
    """F de la configuración o la identidad n×n."""
    if config.F is None:
        return np.eye(n)
    return np.array(config.F, dtype=float)
