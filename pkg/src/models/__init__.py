"""
Paquete de tipos de dominio del laboratorio.

Uso:
    from src.models import ModelSpec, Semigroup, TimeGrid, TruncationConfig
    from src.models import FlowBundle, SolutionPath
"""

from src.models.fields import (
    CallableField,
    ConstantDiffusion,
    ConstantField,
    CoordinateTanhDiffusion,
    DerivativeOrderError,
    DiffusionFamily,
    InvalidModelError,
    LinearField,
    SymbolicField,
    TanhField,
    VectorField,
    polynomial_field,
)
from src.models.model_spec import ModelSpec
from src.models.paths import (
    BrownianPath,
    FlowBundle,
    Formulation,
    MalliavinBundle,
    MalliavinRoute,
    SampleSet,
    SolutionPath,
)
from src.models.spaces import (
    InvalidTruncationError,
    OverflowCapError,
    Semigroup,
    SemigroupError,
    SemigroupKind,
    SemigroupKindError,
    TimeGrid,
    TruncationConfig,
)

__all__ = [
    # Espacios
    "TruncationConfig",
    "TimeGrid",
    "Semigroup",
    "SemigroupKind",
    "InvalidTruncationError",
    "SemigroupError",
    "SemigroupKindError",
    "OverflowCapError",
    # Campos
    "VectorField",
    "ConstantField",
    "LinearField",
    "TanhField",
    "SymbolicField",
    "CallableField",
    "polynomial_field",
    "DiffusionFamily",
    "ConstantDiffusion",
    "CoordinateTanhDiffusion",
    "InvalidModelError",
    "DerivativeOrderError",
    # Modelo y trayectorias
    "ModelSpec",
    "BrownianPath",
    "SolutionPath",
    "FlowBundle",
    "Formulation",
    "MalliavinBundle",
    "MalliavinRoute",
    "SampleSet",
]
