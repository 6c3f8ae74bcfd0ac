"""Limited-measurement decoder: patch layout, centering and defect fusion.

One decoding cycle measures the stabilizers on every patch, moves each
detected defect to its patch center (carrying an adjacent unmeasured
partner along), scores every pair of occupied patches with a fusion
probability, and then applies corrections greedily in order of decreasing
probability, each one accepted with that probability.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .bath import RateTable
from .chain import ChainState
from .exceptions import ConfigError

__all__ = [
    "Variant",
    "PairingPolicy",
    "DecoderConfig",
    "PatchLayout",
    "PatchRecord",
    "PatchRecords",
    "build_layout",
    "new_records",
    "measure_patches",
    "center_defects",
    "fusion_probability",
    "pair_and_correct",
    "decode_cycle",
    "full_measurement_majority",
]


class Variant(str, enum.Enum):
    """Functional form used to score a candidate pair."""

    ERF = "erf"
    DENSITY = "density"
    FULL_BAYES = "full_bayes"

    @property
    def code(self) -> int:
        return {"erf": K.ERF, "density": K.DENSITY, "full_bayes": K.FULL_BAYES}[self.value]


def _as_variant(value) -> Variant:
    try:
        return Variant(value)
    except ValueError:
        names = ", ".join(v.value for v in Variant)
        raise ConfigError(f"unknown variant {value!r}; choose from {names}") from None


class PairingPolicy(str, enum.Enum):
    GREEDY_BERNOULLI = "greedy_bernoulli"


DEFAULT_C_D = 10.0
DEFAULT_CHI_FACTOR = 10.0
DEFAULT_TAU_FACTOR = 5.0


@dataclass(frozen=True)
class DecoderConfig:
    """Decoder knobs.

    ``chi=None`` means ten measurement rounds per unit of hop time
    (``10 * gamma0``); ``tau_decay=None`` means ``5 * lambda_b**2 / gamma0``.
    """

    variant: Variant = Variant.ERF
    c_D: float = DEFAULT_C_D
    chi: float | None = None
    pairing_policy: PairingPolicy = PairingPolicy.GREEDY_BERNOULLI
    tracker_enabled: bool = False
    tau_decay: float | None = None
    activity_threshold: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "variant", _as_variant(self.variant))
        object.__setattr__(self, "pairing_policy", PairingPolicy(self.pairing_policy))
        if not self.c_D > 0:
            raise ConfigError(f"c_D must be positive, got {self.c_D}")
        if self.chi is not None and not self.chi > 0:
            raise ConfigError(f"chi must be positive, got {self.chi}")
        if self.tau_decay is not None and not self.tau_decay > 0:
            raise ConfigError(f"tau_decay must be positive, got {self.tau_decay}")
        if not self.activity_threshold >= 0:
            raise ConfigError("activity_threshold must be non-negative")

    def diffusion(self, rates: RateTable) -> float:
        return self.c_D * rates.gamma0

    def measurement_rate(self, rates: RateTable) -> float:
        return self.chi if self.chi is not None else DEFAULT_CHI_FACTOR * rates.gamma0

    def period(self, rates: RateTable) -> float:
        return 1.0 / self.measurement_rate(rates)

    def decay_time(self, layout: "PatchLayout", rates: RateTable) -> float:
        if self.tau_decay is not None:
            return self.tau_decay
        return DEFAULT_TAU_FACTOR * max(layout.bulk_size, 1) ** 2 / rates.gamma0


@dataclass(frozen=True, eq=False)
class PatchLayout:
    """Periodic measurement geometry on a ring of ``L`` bonds."""

    L: int
    unit_cell: int
    patch_size: int
    centers: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    bond_patch: np.ndarray

    @property
    def bulk_size(self) -> int:
        return self.unit_cell - self.patch_size

    @property
    def measurement_fraction(self) -> float:
        return self.patch_size / self.unit_cell

    @property
    def n_patches(self) -> int:
        return int(self.centers.shape[0])

    @property
    def measured_bonds(self) -> set[int]:
        return {int(b) for b in np.flatnonzero(self.bond_patch >= 0)}

    def patch_bonds(self, p: int) -> list[int]:
        return list(range(int(self.lo[p]), int(self.hi[p]) + 1))


def build_layout(L: int, unit_cell: int, patch_size: int) -> PatchLayout:
    """Evenly spaced patches, one per cell of ``unit_cell`` bonds.

    Cell ``k`` spans bonds ``[k*unit_cell, (k+1)*unit_cell)``; its patch is
    the ``patch_size`` bonds centered on ``k*unit_cell + (unit_cell-1)//2``.
    """
    if unit_cell <= 0 or L % unit_cell:
        raise ConfigError(f"unit cell {unit_cell} must divide L={L}")
    if patch_size % 2 == 0 or patch_size < 3:
        raise ConfigError(f"patch size must be odd and >= 3, got {patch_size}")
    if patch_size > unit_cell:
        raise ConfigError(f"patch size {patch_size} exceeds unit cell {unit_cell}")
    n = L // unit_cell
    half = (patch_size - 1) // 2
    centers = np.arange(n, dtype=np.int64) * unit_cell + (unit_cell - 1) // 2
    lo = centers - half
    hi = centers + half
    bond_patch = np.full(L, -1, dtype=np.int64)
    for p in range(n):
        bond_patch[lo[p]:hi[p] + 1] = p
    return PatchLayout(L, unit_cell, patch_size, centers, lo, hi, bond_patch)


@dataclass(frozen=True)
class PatchRecord:
    """Read-only view of one patch's bookkeeping."""

    patch_id: int
    occupied: bool
    defect_bond: int
    first_detect_time: float
    clock_T1: float
    clock_T2: float


@dataclass(eq=False)
class PatchRecords:
    """Per-patch state stored column-wise (one array entry per patch)."""

    occupied: np.ndarray
    defect_bond: np.ndarray
    first_detect_time: np.ndarray
    clock_T1: np.ndarray
    clock_T2: np.ndarray
    newly: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.occupied.shape[0])

    def __getitem__(self, p: int) -> PatchRecord:
        return PatchRecord(
            patch_id=int(p),
            occupied=bool(self.occupied[p]),
            defect_bond=int(self.defect_bond[p]),
            first_detect_time=float(self.first_detect_time[p]),
            clock_T1=float(self.clock_T1[p]),
            clock_T2=float(self.clock_T2[p]),
        )

    def copy(self) -> "PatchRecords":
        return PatchRecords(*(a.copy() for a in self._arrays()))

    def occupied_ids(self) -> list[int]:
        return [int(p) for p in np.flatnonzero(self.occupied)]

    def _arrays(self):
        return (self.occupied, self.defect_bond, self.first_detect_time,
                self.clock_T1, self.clock_T2, self.newly)


def new_records(layout: PatchLayout) -> PatchRecords:
    n = layout.n_patches
    return PatchRecords(
        occupied=np.zeros(n, dtype=np.uint8),
        defect_bond=layout.centers.copy(),
        first_detect_time=np.zeros(n),
        clock_T1=np.zeros(n),
        clock_T2=np.zeros(n),
        newly=np.zeros(n, dtype=np.uint8),
    )


def _rng_or_dummy(rng):
    # the kernels need a generator even when no draw will happen
    return rng if rng is not None else np.random.default_rng(0)


def measure_patches(state: ChainState, layout: PatchLayout, records: PatchRecords,
                    t: float, config: DecoderConfig | None = None,
                    rates: RateTable | None = None, rng=None):
    """Read every patch at time ``t``.

    Returns ``(records, detections)`` where ``detections`` lists the patches
    that went from empty to occupied.  Tracker hooks only run when
    ``config.tracker_enabled`` (and then ``rates`` and ``rng`` are needed).
    """
    rec = records.copy()
    tracker = bool(config is not None and config.tracker_enabled)
    if tracker and rates is None:
        raise ConfigError("tracker bookkeeping needs the rate table")
    D = config.diffusion(rates) if tracker else 1.0
    period = config.period(rates) if tracker else 1.0
    tau = config.decay_time(layout, rates) if tracker else 1.0
    thr = config.activity_threshold if tracker else 0.0
    r_create = rates.r_create if rates is not None else 0.0
    K.measure(state.walls, layout.lo, layout.hi, layout.centers, rec.occupied,
              rec.defect_bond, rec.first_detect_time, rec.clock_T1, rec.clock_T2,
              rec.newly, float(t), tracker, layout.L, D, r_create, period, tau,
              thr, _rng_or_dummy(rng))
    return rec, [int(p) for p in np.flatnonzero(rec.newly)]


def center_defects(state: ChainState, layout: PatchLayout, records: PatchRecords,
                   t: float = 0.0):
    """Center every detected defect; returns ``(state, records, n_fused)``.

    Walls sharing a patch are fused on the spot.  A lone wall is shuttled
    to the center; if it started on the patch edge with a wall on the
    unmeasured bond just behind it, that partner is pulled onto the patch
    too and the pair is fused.
    """
    out = state.copy()
    rec = records.copy()
    n = K.center_defects(out.flips, out.walls, layout.lo, layout.hi, layout.centers,
                         layout.bond_patch, rec.occupied, rec.defect_bond,
                         rec.clock_T1, rec.clock_T2, float(t))
    return out, rec, int(n)


def effective_elapsed(rec1: PatchRecord, rec2: PatchRecord, t: float, period: float) -> float:
    dt = t - min(rec1.first_detect_time, rec2.first_detect_time)
    return dt if dt > 0 else period


def fusion_probability(rec1: PatchRecord, rec2: PatchRecord, config: DecoderConfig,
                       rates: RateTable, t: float, L: int) -> float:
    """Probability that the defects on two patches came from one pair.

    Uses the ring distance between the defect bonds and the age of the
    older defect; a non-positive age counts as one measurement period.
    """
    dt = effective_elapsed(rec1, rec2, t, config.period(rates))
    x = K.ring_distance(rec1.defect_bond, rec2.defect_bond, L)
    return float(K.fusion_probability(config.variant.code, float(x), dt,
                                      config.diffusion(rates), L, rates.r_create))


def pair_and_correct(state: ChainState, records: PatchRecords, config: DecoderConfig,
                     rng: np.random.Generator, rates: RateTable, t: float):
    """Greedy Bernoulli pairing of occupied patches.

    Returns ``(state, records, log)``; ``log`` lists the fused patch pairs
    in the order they were accepted.
    """
    out = state.copy()
    rec = records.copy()
    log = np.zeros((max(len(rec), 1), 2), dtype=np.int64)
    n = K.pair_and_correct(out.flips, out.walls, rec.occupied, rec.defect_bond,
                           rec.first_detect_time, rec.clock_T1, rec.clock_T2,
                           float(t), config.variant.code, config.diffusion(rates),
                           rates.r_create, config.period(rates), rng, log)
    return out, rec, [(int(a), int(b)) for a, b in log[:n]]


def decode_cycle(state: ChainState, layout: PatchLayout, records: PatchRecords,
                 config: DecoderConfig, rates: RateTable, rng: np.random.Generator,
                 t: float):
    """Measure, center, score and correct once at time ``t``."""
    out = state.copy()
    rec = records.copy()
    log = np.zeros((max(len(rec), 1), 2), dtype=np.int64)
    K.decode_cycle(out.flips, out.walls, layout.lo, layout.hi, layout.centers,
                   layout.bond_patch, rec.occupied, rec.defect_bond,
                   rec.first_detect_time, rec.clock_T1, rec.clock_T2, rec.newly,
                   log, float(t), config.variant.code, config.diffusion(rates),
                   rates.r_create, config.period(rates), config.tracker_enabled,
                   config.decay_time(layout, rates), config.activity_threshold, rng)
    return out, rec


def full_measurement_majority(state: ChainState) -> ChainState:
    """Return the codeword nearest to ``state`` (ties go to the original one)."""
    L = state.L
    if 2 * int(state.flips.sum()) > L:
        flips = np.ones(L, dtype=np.uint8)
    else:
        flips = np.zeros(L, dtype=np.uint8)
    return ChainState(flips, np.zeros(L, dtype=np.uint8))
