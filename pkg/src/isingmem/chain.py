"""Periodic Ising chain in the domain-wall picture.

A :class:`ChainState` stores the spin flips relative to the clean codeword
and the derived wall occupancy on bonds.  Bond ``i`` sits between sites
``i`` and ``i + 1 (mod L)``.  All functions here return new states; the
in-place work is done by the jitted kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .exceptions import DecoderBugError, InvalidSizeError

__all__ = [
    "ChainState",
    "LogicalReadout",
    "new_chain",
    "from_flips",
    "apply_flip",
    "defects",
    "dswap",
    "shuttle",
    "fuse",
    "logical_readout",
]

MIN_LENGTH = 4


@dataclass(frozen=True, eq=False)
class ChainState:
    """Spin flips and wall occupancy of a ring of ``L`` spins."""

    flips: np.ndarray
    walls: np.ndarray

    @property
    def L(self) -> int:
        return int(self.flips.shape[0])

    def copy(self) -> "ChainState":
        return ChainState(self.flips.copy(), self.walls.copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChainState):
            return NotImplemented
        return np.array_equal(self.flips, other.flips) and np.array_equal(
            self.walls, other.walls
        )

    def __repr__(self) -> str:
        f = "".join(map(str, self.flips))
        w = "".join(map(str, self.walls))
        return f"ChainState(flips={f}, walls={w})"


@dataclass(frozen=True)
class LogicalReadout:
    failed: bool
    weight: int


def _walls_of(flips: np.ndarray) -> np.ndarray:
    return (flips ^ np.roll(flips, -1)).astype(np.uint8)


def _check_index(state: ChainState, i: int, what: str = "site") -> int:
    if not 0 <= i < state.L:
        raise IndexError(f"{what} index {i} out of range for L={state.L}")
    return int(i)


def new_chain(L: int) -> ChainState:
    """Clean codeword on ``L`` spins."""
    if int(L) != L or L < MIN_LENGTH:
        raise InvalidSizeError(f"chain length must be an integer >= {MIN_LENGTH}, got {L}")
    L = int(L)
    return ChainState(np.zeros(L, dtype=np.uint8), np.zeros(L, dtype=np.uint8))


def from_flips(flips) -> ChainState:
    """State built from a full 0/1 flip sequence."""
    f = np.asarray(flips, dtype=np.uint8).copy()
    if f.ndim != 1 or f.shape[0] < MIN_LENGTH:
        raise InvalidSizeError(f"chain length must be >= {MIN_LENGTH}")
    if np.any(f > 1):
        raise ValueError("flip bits must be 0 or 1")
    return ChainState(f, _walls_of(f))


def apply_flip(state: ChainState, site: int) -> ChainState:
    site = _check_index(state, site)
    out = state.copy()
    K.flip_site(out.flips, out.walls, site)
    return out


def defects(state: ChainState) -> list[int]:
    """Bonds holding a domain wall, ascending."""
    return [int(b) for b in np.flatnonzero(state.walls)]


def dswap(state: ChainState, i: int) -> ChainState:
    """Exchange the wall values on bonds ``i`` and ``i + 1``.

    Acts on sites ``i, i+1, i+2`` (mod L) by flipping the middle spin when
    the two bonds differ.
    """
    i = _check_index(state, i)
    out = state.copy()
    K.dswap(out.flips, out.walls, i)
    return out


def shuttle(state: ChainState, from_bond: int, to_bond: int, direction: int = 1) -> ChainState:
    """Carry the wall value at ``from_bond`` to ``to_bond`` by adjacent DSWAPs.

    ``direction`` is +1 to walk towards increasing bond index, -1 otherwise,
    wrapping around the ring when needed.
    """
    from_bond = _check_index(state, from_bond, "bond")
    to_bond = _check_index(state, to_bond, "bond")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    out = state.copy()
    K.shuttle(out.flips, out.walls, from_bond, to_bond, direction)
    return out


def fuse(state: ChainState, bond_a: int, bond_b: int) -> ChainState:
    """Annihilate the walls on two bonds by flipping the shorter spin arc.

    Equal arcs go to the one containing the smaller site index.
    """
    a = _check_index(state, bond_a, "bond")
    b = _check_index(state, bond_b, "bond")
    if a == b or not (state.walls[a] and state.walls[b]):
        raise DecoderBugError(f"fuse({a}, {b}) needs walls on two distinct bonds")
    out = state.copy()
    K.fuse(out.flips, out.walls, a, b)
    return out


def logical_readout(state: ChainState) -> LogicalReadout:
    weight = int(state.flips.sum())
    return LogicalReadout(failed=2 * weight > state.L, weight=weight)
