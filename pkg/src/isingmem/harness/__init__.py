"""Experiment harness: configs, lifetime trials, sweeps, fits and the CLI."""

from .config import ExperimentConfig, dump_config, load_config
from .diagnostics import Condition, RegimeReport, error_bound, regime_check
from .experiment import (
    SWEEP_AXES,
    SWEEP_COLUMNS,
    LifetimeEstimate,
    TrialResult,
    compare_decoders,
    derive_config,
    estimate_lifetime,
    full_measurement_failure,
    full_measurement_failure_exact,
    run_trial,
    run_trials,
    summarize,
    sweep,
    tail_rate,
    trial_rng,
)
from .fitting import (
    ExtrapolationResult,
    FiniteSizeExtrapolation,
    FitResult,
    ThresholdFit,
    extrapolate_threshold,
    fit_threshold,
    threshold_curve,
)
