"""Foundational types shared by every other module.

All quantities are in reduced Lennard-Jones units: sigma = epsilon = mass =
k_B = 1 for the reference species.  Positions live in a cuboid box with
per-axis periodic or reflecting boundaries; everything is double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class LjmdError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(LjmdError):
    """Invalid configuration (bad key, bad value, inconsistent setup)."""


class GenerationError(LjmdError):
    """A scenario cannot be realized in the requested domain."""


class OverlapError(LjmdError):
    """Two molecules closer than the overlap threshold (r2 < 1e-12)."""


class BlowUpError(LjmdError):
    """Non-finite or runaway state detected during integration."""

    def __init__(self, step, message):
        super().__init__(f"numerical blow-up at step {step}: {message}")
        self.step = step


class PartitionError(LjmdError):
    """A decomposition request cannot be satisfied on the cell grid."""


class TopologyError(LjmdError):
    """A message arrived from (or is destined to) a non-neighbor worker."""


class WorkerFailureError(LjmdError):
    """A worker died or a message did not arrive within the timeout."""


class WallEscapeError(LjmdError):
    """Molecule at z <= 0 escaped through the wall."""

    def __init__(self, z):
        super().__init__(f"molecule escaped through the wall (z = {z:g})")
        self.z = z


# Overlap threshold on the squared distance; below this the configuration is
# considered catastrophic and aborts instead of producing a huge force.
OVERLAP_R2 = 1e-12


@dataclass(frozen=True)
class Species:
    """Single united-atom species with pure-component LJ parameters."""

    name: str
    sigma: float = 1.0
    epsilon: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        for attr in ("sigma", "epsilon", "mass"):
            if not getattr(self, attr) > 0:
                raise ConfigError(f"species {self.name!r}: {attr} must be > 0")


@dataclass
class Domain:
    """Cuboid simulation box.

    Non-periodic axes get reflecting boundaries at both faces, except that a
    wall (set by the force field) replaces the reflector on the z=0 face.
    """

    lengths: np.ndarray
    periodic: tuple = (True, True, True)
    wall: object = None  # forcefield.WallSpec or None

    def __post_init__(self):
        self.lengths = np.asarray(self.lengths, dtype=np.float64)
        if self.lengths.shape != (3,) or not np.all(self.lengths > 0):
            raise ConfigError("domain lengths must be three positive reals")
        self.periodic = tuple(bool(p) for p in self.periodic)
        if self.wall is not None and self.periodic[2]:
            raise ConfigError("a wall on the z=0 face requires periodic_z = false")

    @property
    def volume(self):
        return float(np.prod(self.lengths))


def wrap_position(r, domain):
    """Wrap periodic components into [0, L); non-periodic components pass through.

    Accepts a single (3,) vector or an (N, 3) array; returns a new array.
    """
    r = np.array(r, dtype=np.float64, copy=True)
    single = r.ndim == 1
    rr = r.reshape(-1, 3)
    L = domain.lengths
    for ax in range(3):
        if not domain.periodic[ax]:
            continue
        x = rr[:, ax]
        x -= np.floor(x / L[ax]) * L[ax]
        # floor rounding can land exactly on L for tiny negative inputs
        x[x >= L[ax]] -= L[ax]
    return rr[0] if single else rr


def minimum_image(dr, domain):
    """Fold periodic components of a displacement into [-L/2, L/2)."""
    dr = np.array(dr, dtype=np.float64, copy=True)
    L = domain.lengths
    for ax in range(3):
        if domain.periodic[ax]:
            dr[..., ax] -= L[ax] * np.floor(dr[..., ax] / L[ax] + 0.5)
    return dr


class Molecules:
    """Struct-of-arrays molecule store: ids, species indices, r, v, f.

    This is the record that moves between cells and workers; all arrays are
    owned (no views), so instances are safe to ship across process
    boundaries.
    """

    __slots__ = ("ids", "species", "r", "v", "f")

    def __init__(self, ids, species, r, v, f=None):
        self.ids = np.ascontiguousarray(ids, dtype=np.int64)
        self.species = np.ascontiguousarray(species, dtype=np.int32)
        self.r = np.ascontiguousarray(r, dtype=np.float64)
        self.v = np.ascontiguousarray(v, dtype=np.float64)
        n = self.ids.shape[0]
        if f is None:
            f = np.zeros((n, 3))
        self.f = np.ascontiguousarray(f, dtype=np.float64)
        for arr in (self.r, self.v, self.f):
            if arr.shape != (n, 3):
                raise ValueError("molecule arrays must share the leading dimension")

    @classmethod
    def empty(cls):
        return cls(np.empty(0, np.int64), np.empty(0, np.int32),
                   np.empty((0, 3)), np.empty((0, 3)), np.empty((0, 3)))

    @property
    def n(self):
        return self.ids.shape[0]

    def copy(self):
        return Molecules(self.ids.copy(), self.species.copy(),
                         self.r.copy(), self.v.copy(), self.f.copy())

    def take(self, idx):
        """New Molecules holding the selected rows (fancy index or mask)."""
        return Molecules(self.ids[idx], self.species[idx],
                         self.r[idx], self.v[idx], self.f[idx])

    @staticmethod
    def concat(parts):
        parts = list(parts)
        if not parts:
            return Molecules.empty()
        return Molecules(
            np.concatenate([p.ids for p in parts]),
            np.concatenate([p.species for p in parts]),
            np.concatenate([p.r for p in parts]),
            np.concatenate([p.v for p in parts]),
            np.concatenate([p.f for p in parts]),
        )

    def sort_by_id(self):
        return self.take(np.argsort(self.ids, kind="stable"))


# Named PRNG substreams.  Every consumer of randomness derives its own
# counter-based stream from (seed, stream id); streams are never shared, so
# results do not depend on call interleaving or worker scheduling.
STREAM_LATTICE = 0
STREAM_VELOCITIES = 1
STREAM_MC = 2


def substream(seed, stream):
    """Deterministic counter-based generator for (seed, stream).

    Key derivation: the 64-bit seed is the first Philox key word, the stream
    id the second.  Equal (seed, stream) pairs give bit-identical output on
    every platform and for every worker count.
    """
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    key = np.array([seed, int(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
