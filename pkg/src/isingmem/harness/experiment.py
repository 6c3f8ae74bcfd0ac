"""Lifetime trials, sweeps and decoder comparisons."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .. import _kernels as K
from ..decoder import Variant
from ..exceptions import ConfigError, IsingMemError
from .config import ExperimentConfig

log = logging.getLogger(__name__)

SWEEP_AXES = ("T", "L", "m", "delta")
SWEEP_COLUMNS = (
    "axis_value", "L", "lambda", "lambda_m", "m", "delta", "temperature", "chi",
    "c_D", "variant", "trials", "completed", "truncated", "mean_lifetime",
    "stderr", "enhancement", "enhancement_stderr", "seed",
)


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    failure_time: float
    event_count: int
    cycle_count: int
    truncated: bool


@dataclass(frozen=True)
class LifetimeEstimate:
    """Summary over completed trials; truncated ones are only counted.

    When every trial was truncated, ``lower_bound_only`` is set and
    ``mean_lifetime`` is the smallest truncation time (a lower bound on
    the lifetime of every trial).
    """

    mean_lifetime: float
    stderr: float
    enhancement: float
    enhancement_stderr: float
    bare_rate: float
    trials: int
    completed: int
    truncated: int
    lower_bound_only: bool

    @property
    def truncation_fraction(self) -> float:
        return self.truncated / self.trials

    @property
    def failure_rate(self) -> float:
        return 1.0 / self.mean_lifetime


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent stream per trial, keyed only by seed and index."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial_index,))
    return np.random.default_rng(seq)


def run_trial(config: ExperimentConfig, trial_index: int) -> TrialResult:
    """Run one memory from the clean codeword to its first majority failure."""
    if trial_index < 0:
        raise ValueError("trial_index must be non-negative")
    rates = config.rates()
    dec = config.decoder_config()
    if config.decoder_enabled:
        layout = config.layout()
        lo, hi, centers, bond_patch = layout.lo, layout.hi, layout.centers, layout.bond_patch
        chi = dec.measurement_rate(rates)
        tau = dec.decay_time(layout, rates)
    else:
        lo = hi = centers = np.zeros(0, dtype=np.int64)
        bond_patch = np.full(config.L, -1, dtype=np.int64)
        chi, tau = 1.0, 1.0
    t, n_ev, n_cyc, trunc = K.run_trial(
        config.L, rates.r_create, rates.r_annihilate, rates.r_hop,
        config.decoder_enabled, lo, hi, centers, bond_patch, dec.variant.code,
        dec.diffusion(rates), chi, dec.tracker_enabled, tau, dec.activity_threshold,
        trial_rng(config.master_seed, trial_index), int(config.max_events),
        float(config.max_time),
    )
    return TrialResult(trial_index, float(t), int(n_ev), int(n_cyc), bool(trunc))


def _run_chunk(args):
    config, indices = args
    return [run_trial(config, i) for i in indices]


def run_trials(config: ExperimentConfig, n_trials: int | None = None) -> list[TrialResult]:
    """All trials of ``config``, sorted by index whatever ``n_jobs`` is."""
    n = config.n_trials if n_trials is None else n_trials
    if config.n_jobs == 1 or n < 2:
        return [run_trial(config, i) for i in range(n)]
    chunks = [(config, list(range(k, n, config.n_jobs))) for k in range(config.n_jobs)]
    with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
        results = [r for part in pool.map(_run_chunk, chunks) for r in part]
    return sorted(results, key=lambda r: r.trial_index)


def summarize(results: list[TrialResult], bare_rate: float) -> LifetimeEstimate:
    if len(results) < 2:
        raise ConfigError("a lifetime estimate needs at least 2 trials")
    done = np.array([r.failure_time for r in results if not r.truncated])
    n_trunc = len(results) - done.size
    if done.size == 0:
        bound = min(r.failure_time for r in results)
        return LifetimeEstimate(bound, math.nan, bound * bare_rate, math.nan, bare_rate,
                                len(results), 0, n_trunc, True)
    mean = float(done.mean())
    se = float(done.std(ddof=1) / math.sqrt(done.size)) if done.size > 1 else math.nan
    return LifetimeEstimate(mean, se, mean * bare_rate, se * bare_rate, bare_rate,
                            len(results), int(done.size), n_trunc, False)


def estimate_lifetime(config: ExperimentConfig) -> LifetimeEstimate:
    """Mean failure time, its standard error and the enhancement over 1/Gamma0."""
    if config.n_trials < 2:
        raise ConfigError("estimate_lifetime needs n_trials >= 2")
    est = summarize(run_trials(config), config.rates().bare_logical)
    if est.truncated:
        log.warning("%d of %d trials truncated at L=%d T=%g", est.truncated, est.trials,
                    config.L, config.temperature)
    return est


def tail_rate(results: list[TrialResult], quantile: float = 0.5) -> float:
    """Exponential decay rate of the survival curve beyond ``quantile``.

    Uses the memoryless estimator (excess time over the cut) on the
    completed trials past the cut.
    """
    times = np.sort([r.failure_time for r in results if not r.truncated])
    if times.size < 4:
        raise ValueError("need at least 4 completed trials")
    cut = float(np.quantile(times, quantile))
    tail = times[times > cut]
    return float(1.0 / np.mean(tail - cut))


# ---------------------------------------------------------------- sweeps

def parse_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(value).limit_denominator(1000)


def derive_config(base: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    """The config for one sweep row.

    The ``m`` axis keeps the patch size and the number of cells fixed and
    sets the unit cell to ``patch_size / m``.
    """
    if axis == "T":
        return base.replace(temperature=float(value))
    if axis == "delta":
        return base.replace(delta=float(value))
    if axis == "L":
        if float(value) != int(float(value)):
            raise ConfigError(f"L must be an integer, got {value}")
        return base.replace(L=int(float(value)))
    if axis == "m":
        m = parse_fraction(value)
        if not 0 < m <= 1:
            raise ConfigError(f"measurement fraction must lie in (0, 1], got {value}")
        cell = Fraction(base.patch_size) / m
        if cell.denominator != 1:
            raise ConfigError(f"m={value} gives a non-integer unit cell with "
                              f"patch size {base.patch_size}")
        cells = base.L // base.unit_cell
        return base.replace(unit_cell=int(cell), L=cells * int(cell))
    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")


def _axis_text(axis, value) -> str:
    if axis == "m":
        return str(parse_fraction(value))
    return repr(float(value)) if axis != "L" else str(int(float(value)))


def config_row(config: ExperimentConfig, axis_value: str) -> dict:
    rates = config.rates()
    dec = config.decoder_config()
    return {
        "axis_value": axis_value,
        "L": config.L,
        "lambda": config.unit_cell,
        "lambda_m": config.patch_size,
        "m": config.patch_size / config.unit_cell,
        "delta": config.delta,
        "temperature": config.temperature,
        "chi": dec.measurement_rate(rates) if config.decoder_enabled else 0.0,
        "c_D": config.c_D,
        "variant": config.variant.value if config.decoder_enabled else "none",
        "seed": config.master_seed,
    }


def sweep(config: ExperimentConfig, axis: str, values) -> list[dict]:
    """One lifetime estimate per value, each row echoing its full config.

    A value that yields an invalid config produces a row with an ``error``
    entry and empty statistics; the sweep goes on.
    """
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    rows = []
    for value in values:
        try:
            row_cfg = derive_config(config, axis, value)
        except (IsingMemError, ValueError, ZeroDivisionError) as exc:
            log.error("sweep value %s skipped: %s", value, exc)
            rows.append({"axis_value": str(value), "error": str(exc)})
            continue
        est = estimate_lifetime(row_cfg)
        row = config_row(row_cfg, _axis_text(axis, value))
        row.update(
            trials=est.trials,
            completed=est.completed,
            truncated=est.truncated,
            mean_lifetime=est.mean_lifetime,
            stderr=est.stderr,
            enhancement=est.enhancement,
            enhancement_stderr=est.enhancement_stderr,
        )
        if est.lower_bound_only:
            row["error"] = "all trials truncated; mean_lifetime is a lower bound"
        rows.append(row)
    return rows


def compare_decoders(config: ExperimentConfig, temperatures) -> dict[str, list[dict]]:
    """Temperature sweeps for every variant, all sharing ``master_seed``."""
    return {v.value: sweep(config.replace(variant=v), "T", temperatures) for v in Variant}


# ------------------------------------------------- full-measurement model

def full_measurement_failure(L: int, flip_prob: float, cycles: int, n_trials: int,
                             rng: np.random.Generator) -> float:
    """Failure probability of a fully measured repetition code.

    Each cycle every spin flips independently with ``flip_prob`` and a
    full syndrome measurement followed by majority recovery resets the
    chain.  A cycle fails when more than half the spins flipped.
    """
    if L < 1 or L % 2 == 0:
        raise ValueError("use an odd L so the majority is never tied")
    if not 0 < flip_prob < 0.5:
        raise ValueError("flip_prob must lie in (0, 1/2)")
    n_flipped = rng.binomial(L, flip_prob, size=(n_trials, cycles))
    failed = (2 * n_flipped > L).any(axis=1)
    return float(failed.mean())


def full_measurement_failure_exact(L: int, flip_prob: float, cycles: int) -> float:
    from scipy.stats import binom

    p_cycle = binom.sf(L // 2, L, flip_prob)
    return float(-np.expm1(cycles * np.log1p(-p_cycle)))


def result_dict(est: LifetimeEstimate) -> dict:
    out = asdict(est)
    out["truncation_fraction"] = est.truncation_fraction
    return out
