"""Closed-form bound and parameter-regime checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..exceptions import ConfigError
from .config import ExperimentConfig

# a condition passes when its small side is below this fraction of the large side
PASS_FACTOR = 0.1


def error_bound(L: int, unit_cell: int, rate_ratio: float) -> float:
    """Union bound on an uncorrectable error: ``(L/lambda) * ratio**((L/lambda)**2)``.

    ``rate_ratio`` is the per-cell error rate over the decoding rate and
    must lie in (0, 1); at 1 or above the bound says nothing.
    """
    if unit_cell <= 0 or L <= 0 or L % unit_cell:
        raise ConfigError(f"unit cell {unit_cell} must divide L={L}")
    if not 0 < rate_ratio < 1:
        raise ValueError(f"rate ratio must lie in (0, 1), got {rate_ratio}")
    cells = L // unit_cell
    return cells * rate_ratio ** (cells * cells)


@dataclass(frozen=True)
class Condition:
    name: str
    small: float
    large: float
    passed: bool
    note: str = ""

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "warn"


@dataclass(frozen=True)
class RegimeReport:
    conditions: tuple[Condition, ...]
    escape_rate: float

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.conditions)

    def as_dict(self) -> dict:
        return {
            "all_pass": self.all_pass,
            "escape_rate": self.escape_rate,
            "conditions": [
                {"name": c.name, "small": c.small, "large": c.large,
                 "verdict": c.verdict, "note": c.note}
                for c in self.conditions
            ],
        }


def regime_check(config: ExperimentConfig) -> RegimeReport:
    """Check the separations of scale the decoder relies on.

    1. detection: a defect crosses the unmeasured bulk (``lambda_b**2``
       hop times) well before a new pair appears (``exp(delta/T)``);
    2. dilute pairs: ``lambda * exp(-delta/T)`` is well below 1;
    3. escape: the fraction ``(g0/g_minus) * (g0/chi)**(lambda_m/2)`` of
       created pairs that slip out of a patch is small, and ``chi > g0``
       so that the estimate applies at all.
    """
    rates = config.rates()
    dec = config.decoder_config()
    g0 = rates.gamma0
    chi = dec.measurement_rate(rates)
    boltz = math.exp(config.delta / config.temperature)
    bulk = config.unit_cell - config.patch_size

    c1 = Condition("detection", float(bulk**2), boltz,
                   bulk**2 < PASS_FACTOR * boltz, "lambda_b^2 vs exp(delta/T)")
    density = config.unit_cell / boltz
    c2 = Condition("dilute_pairs", density, 1.0, density < PASS_FACTOR,
                   "lambda * exp(-delta/T) vs 1")
    escape_frac = (g0 / rates.r_annihilate) * (g0 / chi) ** (config.patch_size / 2)
    fast = chi > g0
    c3 = Condition("escape", escape_frac, 1.0, bool(escape_frac < PASS_FACTOR and fast),
                   "" if fast else "chi <= gamma0: escape estimate not valid")
    return RegimeReport((c1, c2, c3), rates.r_create * escape_frac)
