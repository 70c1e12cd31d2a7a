"""Typical-case phase boundaries for L_p-norm compressed-sensing
reconstruction, a self-contained basis-pursuit LP solver, and Monte Carlo
threshold experiments."""

from .scalar_maps import (
    CavityField,
    Norm,
    QuadratureRule,
    expect_dz,
    gauss_dz_rule,
    gauss_tail,
    phi,
    x_star,
    x_star_slope,
)
from .replica import (
    ModelParams,
    NonconvergenceError,
    OrderParameters,
    PhaseBoundary,
    SaddleSolution,
    alpha_c,
    at_condition,
    free_energy,
    l1_alpha_c,
    l1_success_chihat,
    solve_saddle,
    stationarity_residuals,
    success_solution,
    trace_boundary,
    worst_case_alpha,
)
from .linprog import (
    EqualityConstrainedL1Problem,
    InfeasibleProblemError,
    LpSolution,
    l0_oracle,
    solve_basis_pursuit,
)
from .experiment import (
    CriticalEstimate,
    EnsembleKind,
    ProblemInstance,
    TrialAbortedError,
    TrialOutcome,
    TrialSeed,
    estimate_alpha_c,
    fit_inverse_quadratic,
    make_instance,
    run_trial,
    sample_matrix,
    sample_signal,
)

__version__ = "0.1.0"
