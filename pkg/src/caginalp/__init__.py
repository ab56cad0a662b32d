"""Finite-difference laboratory for the coupled temperature / phase-field system."""

from .coupled_solver import (
    SolutionPair,
    SystemConfig,
    apply_outer_L,
    check_conservation,
    check_uniqueness,
    measure_main_estimate,
    solve_system,
)
from .errors import (
    BlowUpError,
    CaginalpError,
    ConfigError,
    FixedPointError,
    InconclusiveError,
    LinearSolverError,
    NonFiniteFieldError,
    SolverError,
)
from .linear_parabolic import ThetaScheme, measure_linear_estimate, solve_trajectory, step
from .mesh import Field, Grid, Trajectory, h1_seminorm, laplacian_neumann, mean, norm_Lp_omega, norm_Lp_Q
from .nonlinearity import (
    M4Params,
    NonlinearityDescriptor,
    Verdict,
    builtin_double_well,
    builtin_hoffman_jiang,
    builtin_linear,
    builtin_power_law,
    builtin_zero,
    check_hypotheses,
    check_M4_violation,
    compute_embedding_exponent,
    estimate_a0,
    estimate_d0,
    estimate_growth_envelope,
    validate_H3,
)
from .phase_solver import (
    AprioriLedger,
    FixedPointConfig,
    apply_L,
    measure_energy_inequality,
    measure_stability,
    solve_auxiliary_fixed_point,
    solve_auxiliary_stepping,
)
from .verification import ConvergenceReport, ManufacturedCase, ode_reduction_oracle, run_acceptance_suite, run_mms

__all__ = [
    "apply_L",
    "apply_outer_L",
    "AprioriLedger",
    "BlowUpError",
    "builtin_double_well",
    "builtin_hoffman_jiang",
    "builtin_linear",
    "builtin_power_law",
    "builtin_zero",
    "CaginalpError",
    "check_conservation",
    "check_hypotheses",
    "check_M4_violation",
    "check_uniqueness",
    "compute_embedding_exponent",
    "ConfigError",
    "ConvergenceReport",
    "estimate_a0",
    "estimate_d0",
    "estimate_growth_envelope",
    "Field",
    "FixedPointConfig",
    "FixedPointError",
    "Grid",
    "h1_seminorm",
    "InconclusiveError",
    "laplacian_neumann",
    "LinearSolverError",
    "M4Params",
    "ManufacturedCase",
    "mean",
    "measure_energy_inequality",
    "measure_linear_estimate",
    "measure_main_estimate",
    "measure_stability",
    "NonFiniteFieldError",
    "NonlinearityDescriptor",
    "norm_Lp_omega",
    "norm_Lp_Q",
    "ode_reduction_oracle",
    "run_acceptance_suite",
    "run_mms",
    "SolutionPair",
    "solve_auxiliary_fixed_point",
    "solve_auxiliary_stepping",
    "solve_system",
    "solve_trajectory",
    "SolverError",
    "step",
    "SystemConfig",
    "ThetaScheme",
    "Trajectory",
    "validate_H3",
    "Verdict",
]

__version__ = "0.1.0"
