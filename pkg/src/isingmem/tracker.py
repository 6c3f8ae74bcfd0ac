"""Defect-age memory across patch escapes, and two run-length estimates.

When a defect leaves a patch without being corrected, the patch remembers
the defect's age and lets that memory decay exponentially.  A defect that
later shows up on a patch inherits either that patch's memory or, if it
has none, the memory of another empty patch picked at random with weights
given by the Bayesian fusion score.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .bath import RateTable
from .decoder import DecoderConfig, PatchLayout, PatchRecord, PatchRecords
from .exceptions import ConfigError

__all__ = [
    "TrackerConfig",
    "on_patch_emptied",
    "decayed_age",
    "on_redetection",
    "expected_run_time",
    "max_correctable_length",
]


@dataclass(frozen=True)
class TrackerConfig:
    tau_decay: float
    activity_threshold: float = 0.01

    def __post_init__(self):
        if not self.tau_decay > 0:
            raise ConfigError("tau_decay must be positive")

    @classmethod
    def from_decoder(cls, config: DecoderConfig, layout: PatchLayout,
                     rates: RateTable) -> "TrackerConfig":
        return cls(config.decay_time(layout, rates), config.activity_threshold)


def on_patch_emptied(records: PatchRecords, patch: int, t: float) -> PatchRecords:
    """Patch ``patch`` read empty at ``t`` with no correction applied.

    Sets T1 to ``t`` and stores the departing defect's age in T2.
    """
    rec = records.copy()
    if rec.occupied[patch]:
        K.mark_emptied(patch, rec.occupied, rec.first_detect_time, rec.clock_T1,
                       rec.clock_T2, float(t), True)
    return rec


def decayed_age(record: PatchRecord, t: float, tau_decay: float) -> float:
    """Stored age decayed from the time the patch was found empty."""
    if t < record.clock_T1:
        raise ValueError("cannot evaluate the memory before the patch emptied")
    return float(K.decayed_age(record.clock_T2, record.clock_T1, float(t), tau_decay))


def on_redetection(records: PatchRecords, patch: int, t: float, layout: PatchLayout,
                   tracker: TrackerConfig, config: DecoderConfig, rates: RateTable,
                   rng: np.random.Generator):
    """Back-date a defect newly seen on ``patch``.

    With active memory on the patch itself the detection time is moved back
    by the decayed age.  Otherwise one donor among the empty patches with
    active memory may hand over its age (and is then zeroed).  Returns
    ``(records, donor)`` with ``donor == patch`` for self-memory and -1 when
    the defect starts fresh.
    """
    rec = records.copy()
    rec.occupied[patch] = 1
    rec.first_detect_time[patch] = t
    donor = K.redetect(patch, layout.centers, rec.occupied, rec.first_detect_time,
                       rec.clock_T1, rec.clock_T2, float(t), layout.L,
                       config.diffusion(rates), rates.r_create, config.period(rates),
                       tracker.tau_decay, tracker.activity_threshold, rng)
    return rec, int(donor)


def expected_run_time(C: int, tau: float, p: float) -> float:
    """Mean waiting time for ``C`` consecutive successes of probability ``p``,
    one trial every ``tau``: ``tau * (p**-C - 1) / (1 - p)``."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if C < 1 or int(C) != C:
        raise ValueError("C must be a positive integer")
    if not tau > 0:
        raise ValueError("tau must be positive")
    return tau * (p ** (-C) - 1.0) / (1.0 - p)


def max_correctable_length(D: float, tau_esc: float, gamma0: float, unit_cell: float) -> float:
    """``sqrt(D * tau_esc) * ln(gamma0 * tau_esc / unit_cell)``.

    Returns 0 (with a warning) once the log argument drops to 1 or below,
    where the large-``tau_esc`` asymptotics behind the formula break down.
    """
    arg = gamma0 * tau_esc / unit_cell
    if arg <= 1.0:
        if arg < 1.0:
            warnings.warn(
                f"gamma0*tau_esc/lambda = {arg:.3g} <= 1: escape-limited length undefined",
                RuntimeWarning,
                stacklevel=2,
            )
        return 0.0
    return math.sqrt(D * tau_esc) * math.log(arg)
