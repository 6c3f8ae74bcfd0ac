"""Experiment configuration and its YAML file format.

A config file is a flat YAML mapping.  Every key is optional; unknown keys
are rejected.  Example::

    L: 56
    delta: 1.0
    temperature: 0.15
    xi: 1.0
    lambda: 7            # bonds per unit cell
    lambda_m: 3          # measured bonds per cell (odd)
    decoder: true        # false = bare memory, no measurements
    variant: erf         # erf | density | full_bayes
    c_D: 10.0            # D = c_D * gamma0
    chi: auto            # measurement rate, auto = 10 * gamma0
    tracker_enabled: false
    tau_decay: auto      # auto = 5 * (lambda - lambda_m)**2 / gamma0
    activity_threshold: 0.01
    trials: 200
    max_events: 1000000000
    max_time: .inf
    seed: 0
    n_jobs: 1
    out: results
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from ..bath import BathParams, RateTable, rate_table
from ..decoder import DecoderConfig, PatchLayout, Variant, _as_variant, build_layout
from ..exceptions import ConfigError

# file key -> dataclass field
KEY_MAP = {
    "L": "L",
    "delta": "delta",
    "temperature": "temperature",
    "xi": "xi",
    "lambda": "unit_cell",
    "lambda_m": "patch_size",
    "decoder": "decoder_enabled",
    "variant": "variant",
    "c_D": "c_D",
    "chi": "chi",
    "tracker_enabled": "tracker_enabled",
    "tau_decay": "tau_decay",
    "activity_threshold": "activity_threshold",
    "trials": "n_trials",
    "max_events": "max_events",
    "max_time": "max_time",
    "seed": "master_seed",
    "n_jobs": "n_jobs",
    "out": "out",
}
FIELD_MAP = {v: k for k, v in KEY_MAP.items()}


@dataclass(frozen=True)
class ExperimentConfig:
    L: int = 56
    delta: float = 1.0
    temperature: float = 0.15
    xi: float = 1.0
    unit_cell: int = 7
    patch_size: int = 3
    decoder_enabled: bool = True
    variant: Variant = Variant.ERF
    c_D: float = 10.0
    chi: float | None = None
    tracker_enabled: bool = False
    tau_decay: float | None = None
    activity_threshold: float = 0.01
    n_trials: int = 200
    max_events: int = 10**9
    max_time: float = math.inf
    master_seed: int = 0
    n_jobs: int = 1
    out: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", _as_variant(self.variant))
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.max_events <= 0:
            raise ConfigError("max_events must be positive")
        if not self.max_time > 0:
            raise ConfigError("max_time must be positive")
        if self.master_seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.n_jobs < 1:
            raise ConfigError("n_jobs must be >= 1")
        # validate the embedded types eagerly
        self.rates()
        self.decoder_config()
        if self.decoder_enabled:
            self.layout()
        elif self.L < 4:
            raise ConfigError("L must be >= 4")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def bath_params(self) -> BathParams:
        return BathParams(delta=self.delta, temperature=self.temperature, xi=self.xi)

    def rates(self) -> RateTable:
        return rate_table(self.bath_params())

    def layout(self) -> PatchLayout:
        return build_layout(self.L, self.unit_cell, self.patch_size)

    def decoder_config(self) -> DecoderConfig:
        return DecoderConfig(
            variant=self.variant,
            c_D=self.c_D,
            chi=self.chi,
            tracker_enabled=self.tracker_enabled,
            tau_decay=self.tau_decay,
            activity_threshold=self.activity_threshold,
        )

    @property
    def measurement_fraction(self) -> float:
        return self.patch_size / self.unit_cell

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Variant):
                v = v.value
            elif v is None and f.name in ("chi", "tau_decay"):
                v = "auto"
            out[FIELD_MAP[f.name]] = v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = sorted(set(data) - set(KEY_MAP))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        for key, value in data.items():
            name = KEY_MAP[key]
            if name in ("chi", "tau_decay") and (value is None or value == "auto"):
                value = None
            kwargs[name] = value
        try:
            kwargs = _coerce(kwargs)
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


_INT_FIELDS = ("L", "unit_cell", "patch_size", "n_trials", "max_events", "master_seed", "n_jobs")
_FLOAT_FIELDS = ("delta", "temperature", "xi", "c_D", "chi", "tau_decay",
                 "activity_threshold", "max_time")
_BOOL_FIELDS = ("decoder_enabled", "tracker_enabled")


def _coerce(kwargs: dict) -> dict:
    out = dict(kwargs)
    for k in _INT_FIELDS:
        if k in out:
            v = out[k]
            if isinstance(v, bool) or float(v) != int(float(v)):
                raise ConfigError(f"{FIELD_MAP[k]} must be an integer, got {v!r}")
            out[k] = int(float(v))
    for k in _FLOAT_FIELDS:
        if k in out and out[k] is not None:
            out[k] = float(out[k])
    for k in _BOOL_FIELDS:
        if k in out and not isinstance(out[k], bool):
            raise ConfigError(f"{FIELD_MAP[k]} must be true or false")
    return out


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping of keys to values")
    return ExperimentConfig.from_dict(data)


def dump_config(config: ExperimentConfig, path=None) -> str:
    text = yaml.safe_dump(config.to_dict(), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text
