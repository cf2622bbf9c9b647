"""Pair potential, mixing rules, fluid-wall potential and pressure terms.

The pair interaction is the truncated-and-shifted Lennard-Jones potential:
beyond the cutoff it is exactly zero, and inside it is shifted so the energy
is continuous at the cutoff.  A mean-field tail correction for homogeneous
systems is available separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, OverlapError, WallEscapeError, OVERLAP_R2


@dataclass(frozen=True)
class PairParams:
    """Mixed LJ parameters for one species pair, with the shift precomputed."""

    sigma: float
    epsilon: float
    cutoff: float
    u_shift: float

    @classmethod
    def create(cls, sigma, epsilon, cutoff):
        if sigma <= 0 or epsilon < 0 or cutoff <= 0:
            raise ConfigError("pair parameters must be positive")
        sr6 = (sigma / cutoff) ** 6
        u_shift = 4.0 * epsilon * (sr6 * sr6 - sr6)
        return cls(sigma, epsilon, cutoff, u_shift)


@dataclass(frozen=True)
class WallSpec:
    """Planar 9-3 wall on the z=0 face, truncated and shifted at z_cut."""

    epsilon: float
    sigma: float
    z_cut: float

    def __post_init__(self):
        if self.epsilon <= 0 or self.sigma <= 0 or self.z_cut <= 0:
            raise ConfigError("wall parameters must be positive")

    @property
    def u_shift(self):
        s3 = (self.sigma / self.z_cut) ** 3
        return self.epsilon * ((2.0 / 15.0) * s3 ** 3 - s3)


def mix(species_i, species_j, xi=1.0, eta=1.0):
    """Unlike-pair sigma and epsilon from the modified Lorentz-Berthelot rules.

    sigma_ij = eta * (sigma_i + sigma_j) / 2
    epsilon_ij = xi * sqrt(epsilon_i * epsilon_j)

    The binary parameters xi and eta default to 1 (plain combination rules).
    """
    if xi <= 0 or eta <= 0:
        raise ConfigError("binary interaction parameters must be positive")
    sigma = eta * 0.5 * (species_i.sigma + species_j.sigma)
    epsilon = xi * math.sqrt(species_i.epsilon * species_j.epsilon)
    return sigma, epsilon


class SpeciesTable:
    """Ordered species list plus precomputed pairwise mixed parameters.

    The xi/eta matrices are symmetric with unit diagonal; the mixed sigma and
    epsilon tables are built once and exposed as dense (n, n) arrays so the
    force kernels can index them by species pair.
    """

    def __init__(self, species, xi=None, eta=None, cutoff=2.5):
        if not species:
            raise ConfigError("at least one species is required")
        self.species = list(species)
        n = len(self.species)
        self.cutoff = float(cutoff)
        if self.cutoff <= 0:
            raise ConfigError("cutoff must be positive")
        self.xi = np.ones((n, n)) if xi is None else np.asarray(xi, dtype=np.float64)
        self.eta = np.ones((n, n)) if eta is None else np.asarray(eta, dtype=np.float64)
        for name, m in (("xi", self.xi), ("eta", self.eta)):
            if m.shape != (n, n):
                raise ConfigError(f"{name} matrix must be {n}x{n}")
            if not np.array_equal(m, m.T):
                raise ConfigError(f"{name} matrix must be symmetric")
            if not np.all(m > 0):
                raise ConfigError(f"{name} entries must be positive")

        self.sigma_ij = np.empty((n, n))
        self.epsilon_ij = np.empty((n, n))
        self.u_shift_ij = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                s, e = mix(self.species[i], self.species[j],
                           self.xi[i, j], self.eta[i, j])
                p = PairParams.create(s, e, self.cutoff)
                self.sigma_ij[i, j] = p.sigma
                self.epsilon_ij[i, j] = p.epsilon
                self.u_shift_ij[i, j] = p.u_shift
        self.masses = np.array([s.mass for s in self.species])

    @property
    def n_species(self):
        return len(self.species)

    def index(self, name):
        for i, s in enumerate(self.species):
            if s.name == name:
                return i
        raise ConfigError(f"unknown species {name!r}")

    def pair(self, i, j):
        return PairParams(self.sigma_ij[i, j], self.epsilon_ij[i, j],
                          self.cutoff, self.u_shift_ij[i, j])


def lj_pair(r2, p):
    """Truncated-shifted LJ energy and force scalar at squared distance r2.

    Returns (u, fscal) where the force on molecule i of the pair is
    fscal * (r_i - r_j).  Beyond the cutoff both are exactly zero.
    """
    if r2 < OVERLAP_R2:
        raise OverlapError(f"pair overlap: r2 = {r2:g}")
    if r2 >= p.cutoff * p.cutoff:
        return 0.0, 0.0
    s2 = p.sigma * p.sigma / r2
    s6 = s2 * s2 * s2
    u = 4.0 * p.epsilon * (s6 * s6 - s6) - p.u_shift
    fscal = 24.0 * p.epsilon * (2.0 * s6 * s6 - s6) / r2
    return u, fscal


def wall_93(z, w):
    """Energy and z-force of the truncated-shifted 9-3 wall at height z.

    u(z) = eps_w * [(2/15) (sigma_w/z)^9 - (sigma_w/z)^3] - u_shift for
    z < z_cut, zero beyond.  z <= 0 means the molecule escaped through the
    wall and is an error.
    """
    if z <= 0:
        raise WallEscapeError(z)
    if z >= w.z_cut:
        return 0.0, 0.0
    s3 = (w.sigma / z) ** 3
    s9 = s3 ** 3
    u = w.epsilon * ((2.0 / 15.0) * s9 - s3) - w.u_shift
    # f_z = -du/dz
    fz = w.epsilon * ((6.0 / 5.0) * s9 - 3.0 * s3) / z
    return u, fz


def wall_forces(z, w):
    """Vectorized wall energy/force for an array of heights.

    Returns (u_total, fz_array).  Heights >= z_cut contribute nothing.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.size and np.any(z <= 0):
        raise WallEscapeError(float(z.min()))
    fz = np.zeros_like(z)
    u = 0.0
    act = z < w.z_cut
    if np.any(act):
        za = z[act]
        s3 = (w.sigma / za) ** 3
        s9 = s3 ** 3
        u = float(np.sum(w.epsilon * ((2.0 / 15.0) * s9 - s3) - w.u_shift))
        fz[act] = w.epsilon * ((6.0 / 5.0) * s9 - 3.0 * s3) / za
    return u, fz


def long_range_correction(density, pair, n_molecules):
    """Mean-field tail beyond the cutoff for a homogeneous bulk system.

    Returns (u_lrc, p_lrc): the total energy correction and the pressure
    correction, from the analytic integrals of the untruncated LJ tail over
    a uniform density.
    """
    if density < 0:
        raise ConfigError("density must be non-negative")
    rho = float(density)
    sig3 = pair.sigma ** 3
    src3 = (pair.sigma / pair.cutoff) ** 3
    src9 = src3 ** 3
    u_per_mol = (8.0 / 3.0) * math.pi * rho * pair.epsilon * sig3 * (src9 / 3.0 - src3)
    p_lrc = (16.0 / 3.0) * math.pi * rho * rho * pair.epsilon * sig3 * (
        (2.0 / 3.0) * src9 - src3)
    return u_per_mol * n_molecules, p_lrc


@dataclass
class EnergyVirial:
    """Additive potential-energy/virial accumulator (merge is associative)."""

    u_pot: float = 0.0
    virial: float = 0.0
    u_lrc: float = 0.0

    def merge(self, other):
        return EnergyVirial(self.u_pot + other.u_pot,
                            self.virial + other.virial,
                            self.u_lrc + other.u_lrc)


def virial_pressure(ev, n_molecules, volume, t_inst, p_lrc=0.0):
    """Mechanical pressure P = rho T + virial / (3 V) + p_lrc."""
    if volume <= 0:
        raise ConfigError("volume must be positive")
    rho = n_molecules / volume
    return rho * t_inst + ev.virial / (3.0 * volume) + p_lrc
