"""Numerical laboratory for self-consistent transfer operators of mean-field coupled circle maps."""
from .coupling import (
    GeneralKernel,
    Stochastic,
    Translation,
    barycenter_stats,
    mean_field_map,
    psi_dot_matrix,
    pushforward,
    wrapped_gaussian,
)
from .density import (
    CircleDensity,
    NormTriple,
    analytic_norms,
    coefficient_norms,
    evaluate,
    project_zero_average,
    synthesize,
    trig_polynomial,
)
from .maps import ExpandingMapSpec, expansion_audit, map_eval, transfer_matrix
from .operator import OperatorMatrix
from .sto import FixedPointReport, StoModel, fixed_point, sto_apply

__version__ = "0.1.0"

__all__ = [
    "CircleDensity", "NormTriple", "analytic_norms", "coefficient_norms", "evaluate",
    "project_zero_average", "synthesize", "trig_polynomial",
    "ExpandingMapSpec", "expansion_audit", "map_eval", "transfer_matrix",
    "GeneralKernel", "Stochastic", "Translation", "barycenter_stats", "mean_field_map",
    "psi_dot_matrix", "pushforward", "wrapped_gaussian",
    "OperatorMatrix", "FixedPointReport", "StoModel", "fixed_point", "sto_apply",
]
