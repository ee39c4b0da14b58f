"""Simulation and verification lab for stochastic gradient alignment dynamics
on ill-conditioned quadratic losses.

Problems live entirely in the Hessian eigenbasis: a `Spectrum` (eigenvalues
with a dominant/bulk split), a `NoiseProfile` (per-direction gradient noise
variances), and a `State` (iterate coordinates). `theory` evaluates every
closed-form threshold and prediction, `dynamics` runs full and block-projected
stochastic updates, `montecarlo` checks the predictions against sampled
one-step expectations, and `harness`/`cli` package the experiment presets.
"""

from .dynamics import TrajectoryRecord, projected_step, run_trajectory, sample_noise, sgd_step
from .errors import (
    AlignlabError,
    ConstructionError,
    DegenerateBlockError,
    DegenerateStateError,
    DivergenceError,
    InsufficientDataError,
    ParameterError,
    StepSizeError,
    UndefinedBoundError,
    UnsupportedNoiseError,
)
from .harness import ExperimentConfig, load_config
from .montecarlo import (
    DriftSignResult,
    DriftVerdict,
    McEstimate,
    ProjectedLossResult,
    drift_sign_test,
    estimate_conditional_alignment,
    estimate_f_drift,
    estimate_next_block_energy,
    late_phase_statistic,
    one_step_estimates,
    phase1_decay_fit,
    projected_loss_test,
    suggest_phase2_start,
)
from .spectrum import (
    AssumptionReport,
    NoiseProfile,
    Spectrum,
    build_spectrum,
    check_asymptotic_assumptions,
    isotropic_noise,
)
from .state import BlockStats, State, alignment, block_stats, loss, random_init, rescale_to_alignment
from .theory import (
    CrossoverQuadratic,
    CsgdPlan,
    DriftQuadratic,
    RegimeThresholds,
    crossover,
    crossover_gap_bounds,
    csgd_plan,
    drift_quadratic,
    eta_star_lower_bound,
    eta_star_upper_bound,
    expected_drift,
    expected_next_block_energy,
    expected_second_moment,
    g_gap,
    loss_threshold,
    second_moment_variance,
    theory_report,
    theta_star,
    theta_star_rate_fit,
)

__version__ = "0.1.0"
