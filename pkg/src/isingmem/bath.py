"""Ohmic bath rates and exact kinetic Monte Carlo evolution of the chain.

Every jump operator of the bath maps computational basis states to basis
states, so the populations obey a closed classical master equation.  The
chain is therefore evolved as a continuous-time Markov chain with three
local moves per site:

* pair creation where both adjacent bonds are empty,
* pair annihilation where both are occupied,
* a hop where exactly one is occupied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .chain import ChainState
from .exceptions import ConfigError

__all__ = [
    "BathParams",
    "RateTable",
    "EventCatalog",
    "CREATE",
    "ANNIHILATE",
    "HOP_LEFT",
    "HOP_RIGHT",
    "spectral_rate",
    "rate_table",
    "enumerate_events",
    "kmc_step",
    "evolve_until",
    "occupancy_times",
]

CREATE = K.CREATE
ANNIHILATE = K.ANNIHILATE
HOP_LEFT = K.HOP_LEFT
HOP_RIGHT = K.HOP_RIGHT


@dataclass(frozen=True)
class BathParams:
    """Gap ``delta``, temperature, coupling ``xi`` and spectral exponent ``n``.

    Boltzmann's constant is 1.  Only the Ohmic case ``n = 1`` is supported;
    for ``n > 1`` the zero-frequency hop rate vanishes.
    """

    delta: float = 1.0
    temperature: float = 0.15
    xi: float = 1.0
    n: int = 1

    def __post_init__(self):
        for name in ("delta", "temperature", "xi"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive and finite, got {v}")
        if self.n != 1:
            raise ConfigError(f"only the Ohmic bath (n=1) is supported, got n={self.n}")

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature


@dataclass(frozen=True)
class RateTable:
    r_hop: float
    r_create: float
    r_annihilate: float
    bare_logical: float

    @property
    def gamma0(self) -> float:
        return self.r_hop

    @property
    def pair_density(self) -> float:
        """Equilibrium adjacent-pair weight, ``r_create / r_annihilate``."""
        return self.r_create / self.r_annihilate


def spectral_rate(omega: float, params: BathParams) -> float:
    """``xi * |omega / (1 - exp(-beta * omega))|``, with its limit ``xi * T`` at 0."""
    if omega == 0:
        return params.xi * params.temperature
    x = params.beta * omega
    return params.xi * abs(omega / -math.expm1(-x))


def rate_table(params: BathParams) -> RateTable:
    """Hop, creation and annihilation rates plus the bare logical rate.

    Creation takes the Boltzmann-suppressed side of the spectrum, so that
    ``r_create / r_annihilate = exp(-delta / T)``.
    """
    r_hop = spectral_rate(0.0, params)
    r_create = spectral_rate(-params.delta, params)
    r_ann = spectral_rate(params.delta, params)
    x = params.delta / params.temperature
    # 1 / (1 + e^x) without overflow
    fermi = math.exp(-x) / (1.0 + math.exp(-x)) if x > 0 else 1.0 / (1.0 + math.exp(x))
    bare = r_hop * fermi
    for v in (r_hop, r_create, r_ann, bare):
        if not (math.isfinite(v) and v > 0):
            raise ConfigError(f"rates underflow or overflow for {params}")
    return RateTable(r_hop=r_hop, r_create=r_create, r_annihilate=r_ann, bare_logical=bare)


@dataclass(frozen=True, eq=False)
class EventCatalog:
    """Move type and rate for every site, plus the running total."""

    kinds: np.ndarray
    rates: np.ndarray
    counts: np.ndarray
    total: float
    table: RateTable

    def sites(self, kind: int) -> list[int]:
        return [int(s) for s in np.flatnonzero(self.kinds == kind)]


def _rate_vector(rates: RateTable) -> np.ndarray:
    return np.array([rates.r_create, rates.r_annihilate, rates.r_hop, rates.r_hop])


def enumerate_events(state: ChainState, rates: RateTable) -> EventCatalog:
    kinds = np.zeros(state.L, dtype=np.int64)
    counts = np.zeros(3, dtype=np.int64)
    K.classify_all(state.walls, kinds, counts)
    per_site = _rate_vector(rates)[kinds]
    total = K.total_rate(counts, rates.r_create, rates.r_annihilate, rates.r_hop)
    return EventCatalog(kinds=kinds, rates=per_site, counts=counts, total=float(total),
                        table=rates)


def kmc_step(state: ChainState, catalog: EventCatalog, rng: np.random.Generator,
             t_now: float):
    """One Gillespie step: returns ``(new_state, site, t_next)``."""
    if not catalog.total > 0:
        raise RuntimeError("total event rate is zero")
    dt = rng.exponential(1.0 / catalog.total)
    r = catalog.table
    site = K.select_site(catalog.kinds, catalog.counts, r.r_create, r.r_annihilate,
                         r.r_hop, rng)
    out = state.copy()
    K.flip_site(out.flips, out.walls, site)
    return out, int(site), t_now + dt


def evolve_until(state: ChainState, rates: RateTable, rng: np.random.Generator,
                 t_now: float, t_end: float):
    """Evolve from ``t_now`` and freeze the state at ``t_end``.

    The exponential clock pending at ``t_end`` is discarded, which is exact
    because waiting times are memoryless.  Returns ``(state, t_end, n_events)``.
    """
    if t_end < t_now:
        raise ValueError("t_end must not precede t_now")
    out = state.copy()
    if t_end == t_now:
        return out, t_end, 0
    kinds = np.zeros(out.L, dtype=np.int64)
    counts = np.zeros(3, dtype=np.int64)
    K.classify_all(out.walls, kinds, counts)
    n = K.evolve(out.flips, out.walls, kinds, counts, rates.r_create,
                 rates.r_annihilate, rates.r_hop, rng, t_now, t_end)
    return out, t_end, int(n)


def occupancy_times(state: ChainState, rates: RateTable, rng: np.random.Generator,
                    n_events: int, n_batches: int = 20) -> np.ndarray:
    """Time spent in each of the ``2**L`` configurations over ``n_events`` jumps.

    Returns an array of shape ``(n_batches, 2**L)`` so that batch means can
    be used for error bars.  Configuration ``c`` has flip bit ``s`` equal to
    ``(c >> s) & 1``.
    """
    if state.L > 16:
        raise ConfigError("occupancy tracking is limited to L <= 16")
    out = state.copy()
    return K.occupancy_times(out.flips, out.walls, rates.r_create,
                             rates.r_annihilate, rates.r_hop, rng,
                             int(n_events), int(n_batches))
