"""Simulation of a thermally coupled Ising-chain memory under patch-limited
syndrome measurement, with a probabilistic fusion decoder."""

from .bath import (
    ANNIHILATE,
    CREATE,
    HOP_LEFT,
    HOP_RIGHT,
    BathParams,
    EventCatalog,
    RateTable,
    enumerate_events,
    evolve_until,
    kmc_step,
    occupancy_times,
    rate_table,
    spectral_rate,
)
from .chain import (
    ChainState,
    LogicalReadout,
    apply_flip,
    defects,
    dswap,
    from_flips,
    fuse,
    logical_readout,
    new_chain,
    shuttle,
)
from .decoder import (
    DecoderConfig,
    PairingPolicy,
    PatchLayout,
    PatchRecord,
    PatchRecords,
    Variant,
    build_layout,
    center_defects,
    decode_cycle,
    full_measurement_majority,
    fusion_probability,
    measure_patches,
    new_records,
    pair_and_correct,
)
from .exceptions import ConfigError, DecoderBugError, FitError, InvalidSizeError, IsingMemError
from .tracker import (
    TrackerConfig,
    decayed_age,
    expected_run_time,
    max_correctable_length,
    on_patch_emptied,
    on_redetection,
)

__version__ = "0.1.0"
