"""Inequality-testing engine for partially identified models.

Tests of polyhedral restrictions on moment means with data-dependent
chi-squared critical values, subvector variants for conditional systems with
linearly entering nuisance parameters, confidence sets by test inversion, and
a Monte Carlo harness.
"""

__version__ = "0.1.0"

from .errors import (
    BudgetExceededError,
    CovarianceError,
    DegeneratePivotError,
    InfeasibleError,
    InternalInvariantError,
    NumericalError,
)
from .linalg import (
    DEFAULT_TOLERANCES,
    LpResult,
    PolyhedralSpec,
    ProjectionResult,
    Tolerances,
    cholesky_factor,
    enumerate_vertices,
    matrix_rank,
    project_polyhedron,
    reduced_row_echelon,
    solve_lp,
)
from .distributions import chi2_cdf, chi2_quantile, normal_cdf, normal_quantile
from .fullvector import (
    FullVectorProblem,
    TestOutcome,
    compute_beta,
    compute_statistic,
    compute_tau,
    run_test,
    sample_variance,
)
from .subvector import (
    EliminatedSystem,
    SubvectorProblem,
    compute_rank_sub,
    compute_statistic_sub,
    cond_var_discrete,
    cond_var_nearest_neighbor,
    detect_implicit_equalities,
    eliminate_nuisance,
    run_subvector_test,
)
from .inference import (
    ConfidenceSetReport,
    GridSpec,
    ProjectionData,
    identified_set_interval_regression,
    invert_test,
    nelder_mead,
    projection_test,
)
from .intervalreg import IntervalRegressionDesign
from .montecarlo import (
    FullVectorDesign,
    MonteCarloReport,
    compute_metrics,
    correlation_preset,
    simulate_fullvector,
    simulate_interval_regression,
)
from .estimators import (
    InequalityConfidenceSet,
    MomentInequalityTest,
    SubvectorInequalityTest,
)

__all__ = [
    "BudgetExceededError", "CovarianceError", "DegeneratePivotError",
    "InfeasibleError", "InternalInvariantError", "NumericalError",
    "DEFAULT_TOLERANCES", "LpResult", "PolyhedralSpec", "ProjectionResult",
    "Tolerances", "cholesky_factor", "enumerate_vertices", "matrix_rank",
    "project_polyhedron", "reduced_row_echelon", "solve_lp",
    "chi2_cdf", "chi2_quantile", "normal_cdf", "normal_quantile",
    "FullVectorProblem", "TestOutcome", "compute_beta", "compute_statistic",
    "compute_tau", "run_test", "sample_variance",
    "EliminatedSystem", "SubvectorProblem", "compute_rank_sub",
    "compute_statistic_sub", "cond_var_discrete", "cond_var_nearest_neighbor",
    "detect_implicit_equalities", "eliminate_nuisance", "run_subvector_test",
    "ConfidenceSetReport", "GridSpec", "ProjectionData",
    "identified_set_interval_regression", "invert_test", "nelder_mead",
    "projection_test",
    "IntervalRegressionDesign",
    "FullVectorDesign", "MonteCarloReport", "compute_metrics",
    "correlation_preset", "simulate_fullvector", "simulate_interval_regression",
    "InequalityConfidenceSet", "MomentInequalityTest", "SubvectorInequalityTest",
]
