"""
Servicios de cálculo del laboratorio.

Este módulo expone las operaciones principales de cada servicio para
facilitar las importaciones en la CLI y en los tests.
"""

# Espacios truncados: semigrupo y normas ponderadas
from src.services.spaces_service import (
    apply_inverse_semigroup,
    apply_semigroup,
    e_norm,
    h_norm,
    hs_norm,
    op_norm,
)

# Zoo de modelos
from src.services.model_zoo import (
    UnknownModelError,
    available_models,
    big_sigma,
    polynomial_model,
    sigma0,
    zoo,
)

# Integrador de la solución mild
from src.services.sde_solver import (
    BlowUpError,
    coarsen_brownian,
    picard_diagnostic,
    sample_brownian,
    solve_mild,
    strong_order_study,
)

# Primera variación e inverso a derecha
from src.services.variation_flow import (
    FormulationError,
    residual_Q,
    solve_first_variation,
    solve_flows,
    solve_right_inverse,
)

# Derivada de Malliavin y covarianza
from src.services.malliavin import (
    RankDeficientFunctionalError,
    covariance,
    gamma_spectrum,
    product_formula,
    quadratic_form,
    solve_malliavin_sde,
)

# Corchetes de Lie y condición de Hörmander
from src.services.lie_hormander import (
    ExpressionCapError,
    corrected_bracket,
    generate_sets,
    hormander_rank,
    lie_bracket,
    semimartingale_check,
)

# Veredicto de densidad
from src.services.density import (
    BlowUpFractionError,
    GriddingRefusedError,
    atom_test,
    kde,
    monte_carlo,
    silverman_bandwidth,
    verdict,
)

# Exportar todo
__all__ = [
    # Spaces
    "apply_semigroup",
    "apply_inverse_semigroup",
    "e_norm",
    "h_norm",
    "hs_norm",
    "op_norm",
    # Models
    "zoo",
    "available_models",
    "polynomial_model",
    "sigma0",
    "big_sigma",
    "UnknownModelError",
    # SDE solver
    "sample_brownian",
    "coarsen_brownian",
    "solve_mild",
    "picard_diagnostic",
    "strong_order_study",
    "BlowUpError",
    # Variation flow
    "solve_first_variation",
    "solve_right_inverse",
    "solve_flows",
    "residual_Q",
    "FormulationError",
    # Malliavin
    "solve_malliavin_sde",
    "product_formula",
    "covariance",
    "quadratic_form",
    "gamma_spectrum",
    "RankDeficientFunctionalError",
    # Lie / Hörmander
    "generate_sets",
    "lie_bracket",
    "corrected_bracket",
    "hormander_rank",
    "semimartingale_check",
    "ExpressionCapError",
    # Density
    "monte_carlo",
    "silverman_bandwidth",
    "kde",
    "atom_test",
    "verdict",
    "BlowUpFractionError",
    "GriddingRefusedError",
]
