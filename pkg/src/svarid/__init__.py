"""Direct causal effect identification and estimation for latently
confounded SVAR time series, from observed autocovariances and the lag
structure of the causal graph."""

from .graph import GraphError, LagStructure, SearchWindowExceeded, Vertex, t_inf, t_sup
from .identify import (
    Certificate,
    CheckResult,
    CoeffColumn,
    EstimatorSpec,
    IdentificationError,
    check_conditions_c,
    check_upsilon_uniqueness,
    construct_bu_fobs,
    construct_r,
    delta_sweep,
    select_spec,
)
from .estimate import (
    BootstrapResult,
    DirectEffectEstimator,
    EffectEstimate,
    ExactCovarianceProvider,
    IllConditionedError,
    SampleCovarianceProvider,
    block_bootstrap,
    build_system,
    estimate_from_data,
    solve_effects,
)
from .identify import PathSystem
from .svar import (
    CovarianceTable,
    NumericalError,
    SvarParams,
    Trek,
    draw_stable_params,
    exact_autocov,
    iter_treks,
    parent_decomposition_residual,
    sample_autocov,
    simulate,
    spectral_margin,
    trek_sum_truncated,
)
from .catalog import EXAMPLES, WorkedExample, worked_example
from . import catalog, electricity, experiments, graph, identify, svar  # noqa: F401

__version__ = "0.1.0"

__all__ = [
    "BootstrapResult",
    "Certificate",
    "CheckResult",
    "CoeffColumn",
    "CovarianceTable",
    "DirectEffectEstimator",
    "EXAMPLES",
    "EffectEstimate",
    "EstimatorSpec",
    "ExactCovarianceProvider",
    "GraphError",
    "IdentificationError",
    "IllConditionedError",
    "LagStructure",
    "NumericalError",
    "PathSystem",
    "SampleCovarianceProvider",
    "SearchWindowExceeded",
    "SvarParams",
    "Trek",
    "Vertex",
    "WorkedExample",
    "block_bootstrap",
    "build_system",
    "check_conditions_c",
    "check_upsilon_uniqueness",
    "construct_bu_fobs",
    "construct_r",
    "delta_sweep",
    "draw_stable_params",
    "estimate_from_data",
    "exact_autocov",
    "iter_treks",
    "parent_decomposition_residual",
    "sample_autocov",
    "select_spec",
    "simulate",
    "solve_effects",
    "spectral_margin",
    "t_inf",
    "t_sup",
    "trek_sum_truncated",
    "worked_example",
]
