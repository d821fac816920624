"""Supercritical branching diffusion toolkit.

A particle branches into two at spatial rate v(x) (continuous, nonnegative,
compactly supported) while diffusing as standard Brownian motion.  When the
operator (1/2)*Laplacian + v has a positive principal eigenvalue lambda0, the
population grows like exp(lambda0*t) and its spatial profile is governed by
the positive eigenfunction psi.  This package computes the spectral objects
(lambda0, psi, moment profiles f_n, window normalizers g(t), finite-limit
probabilities M^n), runs an exact Monte Carlo of the particle system, and
checks the predicted asymptotics against the realizations.
"""

from .rate_field import RateField, DimensionMismatch
from .grid import Grid
from .spectral import (
    OperatorMatrix,
    SpectralData,
    NoPositiveEigenvalue,
    NonConvergence,
    ShiftInsideSpectrum,
    discretize,
    principal_eigenpair,
    resolvent_apply,
    evolve_density,
    mass_and_alpha,
)
from .regions import Region, VelocityTooFast
from .moments import MomentTable, compute_f, xi_moment, g_window
from .mc import (
    ParticleSnapshot,
    EnsembleStats,
    MCConfig,
    simulate_replica,
    count_in,
    run_ensemble,
)
from .analysis import (
    TheoremReport,
    growth_rate_fit,
    limit_moment_check,
    domain_fraction_check,
    moving_window_check,
    front_speed_check,
    dichotomy_check,
)
from .extinction import (
    ExtinctionTable,
    DimensionTooLow,
    solve_M,
    fk_survival_mc,
    compare_M_to_mc,
)

__all__ = [
    "RateField", "DimensionMismatch", "Grid",
    "OperatorMatrix", "SpectralData", "NoPositiveEigenvalue", "NonConvergence",
    "ShiftInsideSpectrum", "discretize", "principal_eigenpair",
    "resolvent_apply", "evolve_density", "mass_and_alpha",
    "Region", "VelocityTooFast",
    "MomentTable", "compute_f", "xi_moment", "g_window",
    "ParticleSnapshot", "EnsembleStats", "MCConfig", "simulate_replica",
    "count_in", "run_ensemble",
    "TheoremReport", "growth_rate_fit", "limit_moment_check",
    "domain_fraction_check", "moving_window_check", "front_speed_check",
    "dichotomy_check",
    "ExtinctionTable", "DimensionTooLow", "solve_M", "fk_survival_mc",
    "compare_M_to_mc",
]
