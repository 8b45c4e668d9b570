"""Numerical toolkit for null control of stochastic heat equations.

Approximate null controls for forward and backward semilinear stochastic
heat equations are computed by a penalized variational method (HUM) on a
binary Brownian scenario tree, with Banach fixed-point iteration for the
semilinear terms and numerical audits of the Carleman-type observability
inequalities that drive the weight choices.
"""

__version__ = "0.1.0"

from .carleman_audit import (
    BACKWARD_STOCHASTIC,
    DETERMINISTIC_FORWARD,
    FORWARD_STOCHASTIC,
    INEQUALITIES,
    RANDOM_FORWARD,
    TERM_TABLES,
    AuditReport,
    TermSpec,
    audit_backward_carleman,
    audit_deterministic_carleman,
    audit_forward_carleman,
)
from .errors import NumericError, ParameterError, StochumError
from .grids import Grid1D, make_grid
from .hum import (
    BACKWARD_ONE_CONTROL,
    FORWARD_TWO_CONTROLS,
    ControlSolution,
    HUMConfig,
    HUMWeights,
    assemble_hum_weights,
    evaluate_J,
    gradient_J,
    s_norm,
    s_tilde_norm,
    solve_hum,
)
from .pde import (
    DiscreteLaplacian,
    build_propagator,
    solve_backward_spde,
    solve_backward_state,
    solve_forward_spde,
    solve_random_forward,
)
from .probability import (
    AdaptedField,
    NoiseTree,
    build_tree,
    conditional_expectation,
    expectation,
    gaussian_field,
    gaussian_leaf_vectors,
    gaussian_root_vector,
    martingale_part,
)
from .semilinear import (
    NONLINEARITY_KINDS,
    SATURATED_LINEAR,
    SCALED_SIN,
    SCALED_TANH,
    ZERO,
    FixedPointIterate,
    FixedPointTrace,
    NonlinearitySpec,
    apply_nonlinearity,
    fixed_point_backward,
    fixed_point_forward,
    sampled_lipschitz_ratios,
)
from .weights import (
    BACKWARD_CONTROL,
    FORWARD_CONTROL,
    CarlemanFields,
    SpatialWeight,
    WeightParams,
    build_spatial_weight,
    calibrate_lambda,
    carleman_fields,
    sigma_value,
    temporal_gamma,
    temporal_gamma_regularized,
)

__all__ = [
    "__version__",
    "StochumError",
    "ParameterError",
    "NumericError",
    "Grid1D",
    "make_grid",
    "NoiseTree",
    "AdaptedField",
    "build_tree",
    "conditional_expectation",
    "martingale_part",
    "expectation",
    "gaussian_field",
    "gaussian_leaf_vectors",
    "gaussian_root_vector",
    "DiscreteLaplacian",
    "build_propagator",
    "solve_forward_spde",
    "solve_backward_spde",
    "solve_random_forward",
    "solve_backward_state",
    "FORWARD_TWO_CONTROLS",
    "BACKWARD_ONE_CONTROL",
    "HUMConfig",
    "HUMWeights",
    "ControlSolution",
    "assemble_hum_weights",
    "evaluate_J",
    "gradient_J",
    "solve_hum",
    "s_norm",
    "s_tilde_norm",
    "ZERO",
    "SCALED_SIN",
    "SCALED_TANH",
    "SATURATED_LINEAR",
    "NONLINEARITY_KINDS",
    "NonlinearitySpec",
    "FixedPointIterate",
    "FixedPointTrace",
    "apply_nonlinearity",
    "sampled_lipschitz_ratios",
    "fixed_point_forward",
    "fixed_point_backward",
    "BACKWARD_STOCHASTIC",
    "DETERMINISTIC_FORWARD",
    "RANDOM_FORWARD",
    "FORWARD_STOCHASTIC",
    "INEQUALITIES",
    "TermSpec",
    "TERM_TABLES",
    "AuditReport",
    "audit_backward_carleman",
    "audit_deterministic_carleman",
    "audit_forward_carleman",
    "FORWARD_CONTROL",
    "BACKWARD_CONTROL",
    "WeightParams",
    "SpatialWeight",
    "CarlemanFields",
    "temporal_gamma",
    "temporal_gamma_regularized",
    "build_spatial_weight",
    "sigma_value",
    "carleman_fields",
    "calibrate_lambda",
]
