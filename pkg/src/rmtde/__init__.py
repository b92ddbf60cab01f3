"""Deterministic equivalents for correlated, non-Gaussian MIMO multiple-access channels.

Fixed-point solvers for the Stieltjes and Shannon transforms of
``B_N = S + H H^H``, a seeded Monte-Carlo simulator to check them, and
water-filling input covariance design.
"""

from .channel_models import (
    ChannelDraw,
    FadingSpec,
    ScenarioSpec,
    UserChannel,
    assemble_channel,
    build_scenario,
    cv_of,
    power_check,
    sample_fading,
    ula_correlation,
)
from .covariance_opt import CovarianceSolution, optimize_covariance, waterfill_allocation
from .det_equiv import (
    DetEquivResult,
    FixedPointState,
    SolverOptions,
    UniquenessDiagnostic,
    det_shannon,
    det_stieltjes,
    marchenko_pastur_stieltjes,
    moment_identity,
    shannon_via_integral,
    solve_fixed_point,
    uniqueness_diagnostic,
)
from .errors import ConvergenceError, ScenarioError, TrialError, ValidationFailure
from .monte_carlo import (
    ESD,
    EnsembleResult,
    distribution_gap,
    empirical_mutual_info,
    empirical_stieltjes,
    esd,
    run_ensemble,
)
from .scenario_io import load_scenario, scenario_from_dict, scenario_to_dict

__all__ = [
    "ChannelDraw",
    "FadingSpec",
    "ScenarioSpec",
    "UserChannel",
    "assemble_channel",
    "build_scenario",
    "cv_of",
    "power_check",
    "sample_fading",
    "ula_correlation",
    "CovarianceSolution",
    "optimize_covariance",
    "waterfill_allocation",
    "DetEquivResult",
    "FixedPointState",
    "SolverOptions",
    "UniquenessDiagnostic",
    "det_shannon",
    "det_stieltjes",
    "marchenko_pastur_stieltjes",
    "moment_identity",
    "shannon_via_integral",
    "solve_fixed_point",
    "uniqueness_diagnostic",
    "ConvergenceError",
    "ScenarioError",
    "TrialError",
    "ValidationFailure",
    "ESD",
    "EnsembleResult",
    "distribution_gap",
    "empirical_mutual_info",
    "empirical_stieltjes",
    "esd",
    "run_ensemble",
    "load_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
]

__version__ = "0.1.0"
