"""Sparse polynomial chaos expansions fitted by weighted l1 convex optimization."""
from .basis import BasisFamily, MultiIndexSet, build_design_matrix, count_terms, enumerate_multi_indices
from .pcemodel import PceModel, empirical_stats
from .sampling import Distribution, DistributionSpec, draw_samples
from .solver import FitProblem, FitResult, SolverOptions, solve_least_squares, solve_pce, solve_ridge

__all__ = [
    "BasisFamily", "MultiIndexSet", "build_design_matrix", "count_terms", "enumerate_multi_indices",
    "PceModel", "empirical_stats", "Distribution", "DistributionSpec", "draw_samples",
    "FitProblem", "FitResult", "SolverOptions", "solve_least_squares", "solve_pce", "solve_ridge",
]
__version__ = "0.1.0"
