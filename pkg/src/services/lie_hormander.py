"""
Corchetes de Lie de los coeficientes, conjuntos generadores y rango de
Hörmander en un punto.

Convención: [V1, V2](x) = V2'(x)·V1(x) − V1'(x)·V2(x). gen(0) es la deriva de
Stratonovich σ_0 con A tratado como matriz; gen(k), k >= 1, es la columna σ_k.

Conjuntos generadores:
- corrected: Σ'_0 = {σ_k}; Σ'_n = {[σ_k, V], c[V] : V ∈ Σ'_{n−1}}, con
  c[V] = [σ_0, V] + ½ Σ_k [σ_k, [σ_k, V]].
- classical: igual pero con [σ_0, V] en lugar de c[V].

Si todos los campos del modelo tienen forma sympy los corchetes se derivan
simbólicamente (exactos); si no, se construyen campos numéricos que derivan
por diferencias finitas anidadas, con la profundidad limitada por
settings.MAX_FD_NESTING.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
import sympy as sp
from numpy.typing import NDArray

from src.core.config import settings
from src.core.exceptions import InvalidArgumentError, LabError, NonFiniteInputError
from src.core.logging_config import get_logger
from src.core.metrics import get_metrics
from src.models.fields import DerivedField, SymbolicField, VectorField, state_symbols
from src.models.model_spec import ModelSpec
from src.models.paths import BrownianPath, FlowBundle, SolutionPath
from src.schemas.reports import SpanReport, SpanVector
from src.services.model_zoo import sigma0

logger = get_logger(__name__)
metrics = get_metrics()

Variant = Literal["corrected", "classical"]


# ==================== EXCEPCIONES PERSONALIZADAS ====================


class ExpressionCapError(LabError):
    """
    La enumeración de corchetes superó el tope de expresiones.

    Attributes:
        count: Expresiones generadas al detenerse.
        cap: Tope configurado.
        depth: Profundidad pedida.
    """

    def __init__(self, count: int, cap: int, depth: int):
        self.count = count
        self.cap = cap
        self.depth = depth
        super().__init__(
            f"{count} expresiones de corchete superan el tope {cap} a profundidad {depth}; "
            f"reducir bracket_depth"
        )


# ==================== EXPRESIONES ====================


@dataclass(frozen=True)
class BracketExpr:
    """
    Árbol de corchetes sobre los generadores.

    Attributes:
        kind: "gen", "bracket" o "corrected".
        index: Índice del generador (solo kind="gen").
        left: Primer argumento (bracket) o argumento único (corrected).
        right: Segundo argumento (bracket).
    """

    kind: Literal["gen", "bracket", "corrected"]
    index: int = 0
    left: "BracketExpr | None" = None
    right: "BracketExpr | None" = None

    @property
    def depth(self) -> int:
        if self.kind == "gen":
            return 0
        if self.kind == "corrected":
            return 1 + self.left.depth  # type: ignore[union-attr]
        return 1 + max(self.left.depth, self.right.depth)  # type: ignore[union-attr]

    def render(self) -> str:
        """Notación '[s0,[s1,s2]]'; c[V] para el corchete corregido."""
        if self.kind == "gen":
            return f"s{self.index}"
        if self.kind == "corrected":
            return f"c[{self.left.render()}]"  # type: ignore[union-attr]
        return f"[{self.left.render()},{self.right.render()}]"  # type: ignore[union-attr]

    def __str__(self) -> str:
        return self.render()


def gen(index: int) -> BracketExpr:
    return BracketExpr(kind="gen", index=index)


def bracket(left: BracketExpr, right: BracketExpr) -> BracketExpr:
    return BracketExpr(kind="bracket", left=left, right=right)


def corrected(inner: BracketExpr) -> BracketExpr:
    return BracketExpr(kind="corrected", left=inner)


def generate_sets(
    depth: int,
    m: int,
    cap: int | None = None,
    variant: Variant = "corrected",
) -> list[BracketExpr]:
    """
    Σ'_0 ∪ … ∪ Σ'_depth como árboles de expresiones.

    Los auto-corchetes [σ_k, σ_k] (idénticamente nulos) se podan y los
    duplicados por igualdad de árbol se eliminan conservando el orden.

    Args:
        depth: Profundidad >= 0.
        m: Número de columnas de difusión.
        cap: Tope de expresiones (None = settings.BRACKET_EXPRESSION_CAP).
        variant: "corrected" o "classical".

    Returns:
        Lista ordenada por nivel.

    Raises:
        ExpressionCapError: Si el total supera cap.

    Example:
        >>> [e.render() for e in generate_sets(1, 1)]
        ['s1', 'c[s1]']
    """
    if depth < 0:
        raise InvalidArgumentError("depth debe ser >= 0")
    if variant not in ("corrected", "classical"):
        raise InvalidArgumentError(f"Variante desconocida: {variant}")
    limit = settings.BRACKET_EXPRESSION_CAP if cap is None else cap

    layer = [gen(k) for k in range(1, m + 1)]
    result: list[BracketExpr] = list(layer)
    seen = set(result)
    if len(result) > limit:
        raise ExpressionCapError(len(result), limit, depth)

    for _ in range(depth):
        candidates: list[BracketExpr] = []
        for inner in layer:
            for k in range(1, m + 1):
                generator = gen(k)
                if generator != inner:
                    candidates.append(bracket(generator, inner))
            candidates.append(corrected(inner) if variant == "corrected" else bracket(gen(0), inner))

        layer = []
        for expr in candidates:
            if expr in seen:
                continue
            seen.add(expr)
            layer.append(expr)
            result.append(expr)
            if len(result) > limit:
                raise ExpressionCapError(len(result), limit, depth)

    return result


# ==================== CORCHETES NUMÉRICOS ====================


def lie_bracket(V1: VectorField, V2: VectorField, x: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    [V1, V2](x) = V2'(x)·V1(x) − V1'(x)·V2(x).

    Raises:
        DerivativeOrderError: Si algún jacobiano agota las diferencias finitas.

    Example:
        >>> B = LinearField([[0.0, 1.0], [0.0, 0.0]])
        >>> C = LinearField([[0.0, 0.0], [1.0, 0.0]])
        >>> lie_bracket(B, C, np.array([1.0, 2.0]))  # (CB − BC)x
        array([-1.,  2.])
    """
    return V2.jacobian(x) @ V1.eval(x) - V1.jacobian(x) @ V2.eval(x)


def corrected_bracket(model: ModelSpec, V: VectorField, x: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    [σ_0, V] + ½ Σ_k [σ_k, [σ_k, V]] en forma cerrada.

    Se evalúa como [Ax + α, V](x) + Σ_k (−σ'_k(V'σ_k) + ½ V''(σ_k, σ_k) + σ'_k(σ'_k V)),
    que solo requiere derivadas segundas de V y primeras de σ_k.
    """
    sg = model.sg
    drift_value = sg.apply_generator(x) + model.drift.eval(x)
    drift_jacobian = sg.generator_matrix() + model.drift.jacobian(x)
    value = V.eval(x)
    jacobian = V.jacobian(x)

    out = jacobian @ drift_value - drift_jacobian @ value
    sigma = model.diffusion.assemble(x)
    sigma_jacobians = model.diffusion.jacobians(x)
    for k in range(model.m):
        column = sigma[:, k]
        column_jacobian = sigma_jacobians[k]
        out += -column_jacobian @ (jacobian @ column)
        out += 0.5 * V.hessian_action(x, column, column)
        out += column_jacobian @ (column_jacobian @ value)
    return out


def _max_level(fields: Sequence[VectorField], order: int) -> int:
    return max((field.fd_levels[order] for field in fields), default=0)


class StratonovichDriftField(DerivedField):
    """σ_0 como campo numérico."""

    def __init__(self, model: ModelSpec):
        super().__init__(model.n, _max_level(model.diffusion.columns, 1))
        self.model = model

    def eval(self, x):
        return sigma0(self.model, x)


class LieBracketField(DerivedField):
    """[left, right] como campo numérico."""

    def __init__(self, left: VectorField, right: VectorField):
        super().__init__(left.dim, _max_level((left, right), 1))
        self.left = left
        self.right = right

    def eval(self, x):
        return lie_bracket(self.left, self.right, x)


class CorrectedBracketField(DerivedField):
    """c[V] por la forma cerrada."""

    def __init__(self, model: ModelSpec, inner: VectorField):
        columns = model.diffusion.columns
        level = max(
            inner.fd_levels[2],
            _max_level(columns, 1),
            model.drift.fd_levels[1],
        )
        super().__init__(inner.dim, level)
        self.model = model
        self.inner = inner

    def eval(self, x):
        return corrected_bracket(self.model, self.inner, x)


# ==================== CORCHETES SIMBÓLICOS ====================


def _symbolic_bracket(V1: sp.Matrix, V2: sp.Matrix, symbols: Sequence[sp.Symbol]) -> sp.Matrix:
    return V2.jacobian(symbols) * V1 - V1.jacobian(symbols) * V2


class _SymbolicGenerators:
    """Expresiones sympy de σ_0, σ_1, …, σ_m."""

    def __init__(self, model: ModelSpec, columns: Sequence[SymbolicField], drift: SymbolicField):
        self.symbols = state_symbols(model.n)
        state = sp.Matrix(self.symbols)
        self.columns = [column.expr for column in columns]
        generator = sp.Matrix(model.sg.generator_matrix().tolist())
        correction = sp.zeros(model.n, 1)
        for column in self.columns:
            correction += column.jacobian(self.symbols) * column
        self.sigma0 = generator * state + drift.expr - correction / 2

    def generator(self, index: int) -> sp.Matrix:
        return self.sigma0 if index == 0 else self.columns[index - 1]

    def corrected(self, inner: sp.Matrix) -> sp.Matrix:
        total = _symbolic_bracket(self.sigma0, inner, self.symbols)
        for column in self.columns:
            nested = _symbolic_bracket(column, _symbolic_bracket(column, inner, self.symbols), self.symbols)
            total += nested / 2
        return total


def _symbolic_generators(model: ModelSpec) -> _SymbolicGenerators | None:
    drift = model.drift.as_symbolic()
    columns = [column.as_symbolic() for column in model.diffusion.columns]
    if drift is None or any(column is None for column in columns):
        return None
    return _SymbolicGenerators(model, columns, drift)  # type: ignore[arg-type]


# ==================== EVALUADOR ====================


class BracketEvaluator:
    """
    Evalúa árboles BracketExpr sobre los campos de un modelo.

    Usa sympy cuando todos los campos lo permiten y campos numéricos
    derivados en otro caso. Los subárboles se memorizan.
    """

    def __init__(self, model: ModelSpec):
        self.model = model
        self._symbolic = _symbolic_generators(model)
        self._fields: dict[BracketExpr, VectorField] = {}
        self._exprs: dict[BracketExpr, sp.Matrix] = {}

    @property
    def is_symbolic(self) -> bool:
        return self._symbolic is not None

    def _expr(self, node: BracketExpr) -> sp.Matrix:
        cached = self._exprs.get(node)
        if cached is not None:
            return cached
        generators = self._symbolic
        assert generators is not None
        if node.kind == "gen":
            result = generators.generator(node.index)
        elif node.kind == "corrected":
            result = generators.corrected(self._expr(node.left))  # type: ignore[arg-type]
        else:
            result = _symbolic_bracket(
                self._expr(node.left), self._expr(node.right), generators.symbols  # type: ignore[arg-type]
            )
        self._exprs[node] = result
        return result

    def field(self, node: BracketExpr) -> VectorField:
        """Campo asociado a la expresión."""
        cached = self._fields.get(node)
        if cached is not None:
            return cached
        if self._symbolic is not None:
            result: VectorField = SymbolicField(self._expr(node), self._symbolic.symbols)
        elif node.kind == "gen":
            result = (
                StratonovichDriftField(self.model)
                if node.index == 0
                else self.model.diffusion.columns[node.index - 1]
            )
        elif node.kind == "corrected":
            result = CorrectedBracketField(self.model, self.field(node.left))  # type: ignore[arg-type]
        else:
            result = LieBracketField(self.field(node.left), self.field(node.right))  # type: ignore[arg-type]
        self._fields[node] = result
        return result

    def evaluate(self, node: BracketExpr, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.field(node).eval(x)


def nested_corrected_bracket(model: ModelSpec, V: VectorField, x: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    [σ_0, V] + ½ Σ_k [σ_k, [σ_k, V]] por corchetes anidados literales.

    Con campos simbólicos el anidamiento es exacto; si no, usa campos
    numéricos derivados.
    """
    generators = _symbolic_generators(model)
    inner = V.as_symbolic()
    if generators is not None and inner is not None:
        return SymbolicField(generators.corrected(inner.expr), generators.symbols).eval(x)

    total = lie_bracket(StratonovichDriftField(model), V, x)
    for column in model.diffusion.columns:
        total = total + 0.5 * lie_bracket(column, LieBracketField(column, V), x)
    return total


# ==================== RANGO DE HÖRMANDER ====================


def numerical_rank(vectors: NDArray[np.float64], tol: float) -> tuple[NDArray[np.float64], int]:
    """
    Valores singulares descendentes y rango relativo a su máximo.

    Returns:
        (singular_values, rank) con rank = #{s >= tol·s_max}.
    """
    if vectors.size == 0:
        return np.zeros(0), 0
    singular_values = np.linalg.svd(vectors, compute_uv=False)
    top = singular_values[0]
    if top == 0.0:
        return singular_values, 0
    return singular_values, int(np.sum(singular_values >= tol * top))


def hormander_rank(
    model: ModelSpec,
    x: NDArray[np.float64] | None = None,
    depth: int = 2,
    tol: float | None = None,
    variant: Variant = "corrected",
) -> SpanReport:
    """
    Evalúa los corchetes hasta depth en x y calcula el rango del span.

    Args:
        model: Modelo.
        x: Punto de evaluación (None = initial_x).
        depth: Profundidad de corchetes (<= settings.MAX_BRACKET_DEPTH).
        tol: Tolerancia relativa (None = settings.RANK_TOLERANCE).
        variant: Familia de generadores.

    Returns:
        SpanReport con vectores, valores singulares y rango.

    Raises:
        ExpressionCapError: Si hay demasiadas expresiones.
        DerivativeOrderError: Si los campos numéricos agotan las diferencias finitas.
    """
    point = model.initial_x if x is None else np.asarray(x, dtype=float)
    if not np.all(np.isfinite(point)):
        raise NonFiniteInputError("x")
    if depth > settings.MAX_BRACKET_DEPTH:
        raise InvalidArgumentError(f"depth={depth} supera MAX_BRACKET_DEPTH={settings.MAX_BRACKET_DEPTH}")
    tolerance = settings.RANK_TOLERANCE if tol is None else tol
    if not 0.0 < tolerance < 1.0:
        raise InvalidArgumentError("tol debe estar en (0, 1)")

    expressions = generate_sets(depth, model.m, variant=variant)
    metrics.bracket_expressions_total.labels(model=model.name).inc(len(expressions))

    evaluator = BracketEvaluator(model)
    rows = np.array([evaluator.evaluate(expr, point) for expr in expressions])
    singular_values, rank = numerical_rank(rows, tolerance)
    metrics.hormander_rank.labels(model=model.name).set(rank)

    logger.info(
        "bracket_sets_generated",
        model=model.name,
        depth=depth,
        variant=variant,
        expressions=len(expressions),
        symbolic=evaluator.is_symbolic,
        rank=rank,
    )
    return SpanReport(
        point=point,
        vectors=[SpanVector(expression=expr.render(), value=row) for expr, row in zip(expressions, rows)],
        singular_values=singular_values,
        rank=rank,
        tolerance=tolerance,
        n=model.n,
        depth=depth,
        variant=variant,
    )


# ==================== SEMIMARTINGALA ====================


def semimartingale_check(
    model: ModelSpec,
    X: SolutionPath,
    flows: FlowBundle,
    path: BrownianPath,
    V: VectorField,
) -> float:
    """
    max_j ‖Z_jV(X_j) − RHS_j‖_E para la identidad de semimartingala de Z_tV(X_t).

    RHS_j = V(x) + Σ_{i<j} Z_i·(Σ_k [σ_k, V](X_i)·ΔW_i^k + c[V](X_i)·dt),
    con las mismas sumas por la izquierda que el integrador.
    """
    if not flows.is_complete:
        raise InvalidArgumentError("semimartingale_check requiere Z")
    dt = path.grid.dt
    weights = model.cfg.e_weights
    columns = model.diffusion.columns

    rhs = V.eval(X.states[0]).astype(float)
    worst = float(np.linalg.norm(weights * (flows.Z[0] @ rhs - rhs)))
    for j in range(path.grid.steps):
        x = X.states[j]
        increment = corrected_bracket(model, V, x) * dt
        for k, column in enumerate(columns):
            increment = increment + lie_bracket(column, V, x) * path.increments[j, k]
        rhs = rhs + flows.Z[j] @ increment
        lhs = flows.Z[j + 1] @ V.eval(X.states[j + 1])
        worst = max(worst, float(np.linalg.norm(weights * (lhs - rhs))))
    return worst
