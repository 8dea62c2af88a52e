"""Slow-fast heavy-tailed SDE reduction toolkit.

Simulation of two-time-scale systems driven by alpha-stable and general
Levy noise, construction of the random invariant manifold by backward
fixed-point iteration, reduced slow dynamics on the manifold, full and
reduced nonlinear particle filters, and the time-rescaled zero-limit
analysis, with a deterministic CLI front end.
"""

from .config import ExperimentConfig, load_config
from .epsilon_zero import (
    BetaReport,
    BoundCurve,
    ScaledModel,
    beta_of_epsilon,
    fit_beta_constant,
    gap_experiment,
    scaled_stationary,
    simulate_scaled,
    solve_F_scaled,
    theorem_bound,
)
from .errors import (
    AlignmentError,
    ConfigurationError,
    ContractionError,
    DegeneracyWarning,
    DivergenceError,
    LfmsError,
    NonConvergenceError,
    ParameterError,
    StiffnessError,
    WindowError,
)
from .filtering import (
    FilterRun,
    GaussianPrior,
    ObservationPath,
    Sensor,
    TestFunctional,
    compare_filters,
    filter_replica,
    generate_observation,
    run_filter_full,
    run_filter_reduced,
    shape_term,
    systematic_resample,
)
from .manifold import (
    BackwardWindow,
    FTrajectoryEvaluator,
    ManifoldSolution,
    ShadowPoint,
    contraction_bound,
    eval_F,
    manifold_point,
    shadow_point,
    solve_lyapunov_perron,
    suggest_t_back,
)
from .model import (
    HypothesisReport,
    SlowFastModel,
    TrajectoryPair,
    epsilon0_closed_form,
    fitted_decay_rates,
    from_transformed,
    simulate_full,
    simulate_transformed,
    to_transformed,
    validate_hypotheses,
)
from .noise import (
    CompoundPoissonJumps,
    LevyTriplet,
    NoisePath,
    StableParams,
    StationaryPath,
    TruncatedStableJumps,
    brownian_triplet,
    generate_two_sided_levy,
    generate_two_sided_stable,
    sample_alpha_stable,
    shift_path,
    stationary_fast,
    stationary_slow,
    zero_stationary,
)
from .reduced import (
    GapCurve,
    ReducedTrajectory,
    compare_full_reduced,
    simulate_reduced,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "BackwardWindow",
    "BetaReport",
    "BoundCurve",
    "CompoundPoissonJumps",
    "ConfigurationError",
    "ContractionError",
    "DegeneracyWarning",
    "DivergenceError",
    "ExperimentConfig",
    "FTrajectoryEvaluator",
    "FilterRun",
    "GapCurve",
    "GaussianPrior",
    "HypothesisReport",
    "LevyTriplet",
    "LfmsError",
    "ManifoldSolution",
    "NoisePath",
    "NonConvergenceError",
    "ObservationPath",
    "ParameterError",
    "ReducedTrajectory",
    "ScaledModel",
    "Sensor",
    "ShadowPoint",
    "SlowFastModel",
    "StableParams",
    "StationaryPath",
    "StiffnessError",
    "TestFunctional",
    "TrajectoryPair",
    "TruncatedStableJumps",
    "WindowError",
    "beta_of_epsilon",
    "brownian_triplet",
    "compare_filters",
    "compare_full_reduced",
    "contraction_bound",
    "epsilon0_closed_form",
    "eval_F",
    "filter_replica",
    "fit_beta_constant",
    "fitted_decay_rates",
    "from_transformed",
    "gap_experiment",
    "generate_observation",
    "generate_two_sided_levy",
    "generate_two_sided_stable",
    "load_config",
    "manifold_point",
    "run_filter_full",
    "run_filter_reduced",
    "sample_alpha_stable",
    "scaled_stationary",
    "shadow_point",
    "shape_term",
    "shift_path",
    "simulate_full",
    "simulate_reduced",
    "simulate_scaled",
    "simulate_transformed",
    "solve_F_scaled",
    "solve_lyapunov_perron",
    "stationary_fast",
    "stationary_slow",
    "suggest_t_back",
    "systematic_resample",
    "theorem_bound",
    "to_transformed",
    "validate_hypotheses",
    "zero_stationary",
]
