"""Inexact subsampled proximal Newton for sparse composite minimization.

The package minimizes F(w) = mean_i f(x_i @ w; y_i) + (gamma/2)||w||^2
+ lam1 ||w||_1 by building leverage-sampled quadratic models of the smooth
part, solving them inexactly with variance-reduced stochastic solvers under
a verifiable residual certificate, and stepping with a two-phase damped /
undamped schedule.  First-order baselines (FISTA, Prox-SVRG, SAGA) share
the objective, the trace schema, and the benchmark CLI.
"""

from .baselines import (
    FistaConfig,
    SagaConfig,
    SvrgConfig,
    fista_solve,
    prox_svrg_full,
    saga_solve,
)
from .data import (
    DataError,
    SparseDataset,
    add_intercept,
    generate_synthetic,
    load_dataset,
    margins,
    parse_libsvm,
    save_dataset,
    serialize_libsvm,
)
from .errors import NumericsError
from .inner import InnerConfig, InnerReport, catalyst_solve, estimate_lipschitz, prox_svrg
from .leverage import (
    CurvatureDiag,
    SamplingPlan,
    curvature,
    draw_subsample,
    exact_model,
    leverage_scores,
    sampling_plan,
)
from .newton import (
    IterationInfo,
    OuterConfig,
    SelfConcordanceReport,
    inner_target,
    phase1_step,
    selfconcordance_check,
    solve,
    zeta,
    zeta_star,
)
from .objectives import (
    Regularizer,
    RidgeSplit,
    SmoothLoss,
    effective_ridge,
    full_gradient,
    full_objective,
    loss_point,
    prox,
    reg_value,
    shifted_prox,
)
from .subproblem import (
    SubsampledQuadratic,
    component_gradient,
    dual_norm_estimate,
    newton_decrement,
    quad_matvec,
    residual_certificate,
    subproblem_value,
)
from .trace import TRACE_COLUMNS, TraceRecord, read_trace_csv, write_summary_json, write_trace_csv

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "DataError",
    "NumericsError",
    "SparseDataset",
    "parse_libsvm",
    "serialize_libsvm",
    "load_dataset",
    "save_dataset",
    "generate_synthetic",
    "margins",
    "add_intercept",
    "SmoothLoss",
    "Regularizer",
    "RidgeSplit",
    "effective_ridge",
    "loss_point",
    "reg_value",
    "prox",
    "shifted_prox",
    "full_objective",
    "full_gradient",
    "CurvatureDiag",
    "SamplingPlan",
    "curvature",
    "leverage_scores",
    "sampling_plan",
    "draw_subsample",
    "exact_model",
    "SubsampledQuadratic",
    "quad_matvec",
    "subproblem_value",
    "component_gradient",
    "newton_decrement",
    "residual_certificate",
    "dual_norm_estimate",
    "InnerConfig",
    "InnerReport",
    "estimate_lipschitz",
    "prox_svrg",
    "catalyst_solve",
    "OuterConfig",
    "IterationInfo",
    "SelfConcordanceReport",
    "solve",
    "zeta",
    "zeta_star",
    "phase1_step",
    "inner_target",
    "selfconcordance_check",
    "FistaConfig",
    "SvrgConfig",
    "SagaConfig",
    "fista_solve",
    "prox_svrg_full",
    "saga_solve",
    "TraceRecord",
    "TRACE_COLUMNS",
    "write_trace_csv",
    "read_trace_csv",
    "write_summary_json",
]
