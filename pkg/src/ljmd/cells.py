"""Linked-cell spatial structure over a cuboid region plus one halo layer.

The global grid has floor(L / cutoff) cells per axis (at least 3), so every
cell edge is >= the cutoff and all interacting pairs lie in the same or an
adjacent cell.  A grid instance covers one worker's owned cell box; the
surrounding one-cell halo holds shifted copies of remote (or periodic-image)
molecules.  Pair traversal is the 13-cell forward stencil for owned-owned
cell pairs plus the full shell against halo cells.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .core import ConfigError, LjmdError, OverlapError


class OwnershipError(LjmdError):
    """A molecule's position falls outside the grid's owned region."""


def cell_counts(domain, cutoff):
    """floor(L / cutoff) cells per axis; error below 3 cells on any axis."""
    if cutoff <= 0:
        raise ConfigError("cutoff must be positive")
    nc = np.floor(domain.lengths / cutoff).astype(np.int64)
    if np.any(nc < 3):
        raise ConfigError(
            f"domain too small: {tuple(nc)} cells of edge >= {cutoff} "
            "(need at least 3 per axis)")
    return nc


class CellGrid:
    """Cells over an owned cuboid cell box [lo, hi) plus a one-cell halo."""

    def __init__(self, domain, cutoff, owned_box=None):
        self.domain = domain
        self.cutoff = float(cutoff)
        self.nc = cell_counts(domain, cutoff)
        self.cell_len = domain.lengths / self.nc
        if owned_box is None:
            lo = np.zeros(3, dtype=np.int64)
            hi = self.nc.copy()
        else:
            lo = np.asarray(owned_box[0], dtype=np.int64)
            hi = np.asarray(owned_box[1], dtype=np.int64)
        if np.any(lo < 0) or np.any(hi > self.nc) or np.any(hi <= lo):
            raise ConfigError(f"invalid owned cell box {owned_box}")
        self.lo = lo
        self.hi = hi
        self.dims = hi - lo
        self.m = self.dims + 2  # local dims including the halo layer
        self.n_local = int(np.prod(self.m))
        self._build_gcell()
        # loaded state
        self.pos = None
        self.spec = None
        self.srt = None
        self.cstart = None
        self.cend = None
        self.n_owned = 0
        self.src_map = None

    def _build_gcell(self):
        """Local linear cell -> global linear cell (-1 beyond non-periodic faces)."""
        per_axis_g = []
        per_axis_ok = []
        for ax in range(3):
            idx = self.lo[ax] - 1 + np.arange(self.m[ax])
            if self.domain.periodic[ax]:
                g = np.mod(idx, self.nc[ax])
                ok = np.ones(self.m[ax], dtype=bool)
            else:
                ok = (idx >= 0) & (idx < self.nc[ax])
                g = np.clip(idx, 0, self.nc[ax] - 1)
            per_axis_g.append(g)
            per_axis_ok.append(ok)
            # position shift of a halo copy sourced from the wrapped cell
        gx, gy, gz = per_axis_g
        okx, oky, okz = per_axis_ok
        G = (gx[None, None, :]
             + self.nc[0] * (gy[None, :, None] + self.nc[1] * gz[:, None, None]))
        OK = okx[None, None, :] & oky[None, :, None] & okz[:, None, None]
        G = G.copy()
        G[~OK] = -1
        self.gcell = G.ravel().astype(np.int64)
        shifts = []
        for ax, g in enumerate(per_axis_g):
            idx = self.lo[ax] - 1 + np.arange(self.m[ax])
            shifts.append((idx - g) / self.nc[ax] * self.domain.lengths[ax])
        self._axis_shift = shifts

    def local_linear(self, ix, iy, iz):
        return ix + self.m[0] * (iy + self.m[1] * iz)

    def owned_local_of_global(self, g3):
        """Local linear index of an owned global cell (3-column array)."""
        loc = g3 - (self.lo - 1)
        return loc[:, 0] + self.m[0] * (loc[:, 1] + self.m[1] * loc[:, 2])

    def assign(self, positions):
        """Local linear cell of each owned position (wrapped into the domain).

        Positions exactly on the upper domain boundary clamp to the last
        cell; a position outside the owned region is an ownership violation.
        """
        positions = np.asarray(positions, dtype=np.float64)
        g = np.floor(positions / self.cell_len).astype(np.int64)
        np.clip(g, 0, self.nc - 1, out=g)
        inside = np.all((g >= self.lo) & (g < self.hi), axis=1)
        if not np.all(inside):
            k = int(np.argmin(inside))
            raise OwnershipError(
                f"position {positions[k]} in cell {g[k]} outside owned box "
                f"[{self.lo}, {self.hi})")
        return self.owned_local_of_global(g)

    def global_cell_of(self, positions):
        """Global (3-column) cell coordinates of wrapped positions."""
        g = np.floor(np.asarray(positions) / self.cell_len).astype(np.int64)
        np.clip(g, 0, self.nc - 1, out=g)
        return g

    def load(self, owned_r, owned_species, halo_r=None, halo_species=None,
             halo_lcell=None, halo_src=None):
        """Bin owned molecules plus pre-shifted halo copies into cells."""
        lcell = self.assign(owned_r)
        self.n_owned = len(owned_r)
        if halo_r is None:
            halo_r = np.empty((0, 3))
            halo_species = np.empty(0, np.int32)
            halo_lcell = np.empty(0, np.int64)
        cells_all = np.concatenate([lcell, halo_lcell])
        self.pos = np.ascontiguousarray(np.vstack([owned_r, halo_r]))
        self.spec = np.ascontiguousarray(
            np.concatenate([owned_species, halo_species]).astype(np.int32))
        self.srt = np.argsort(cells_all, kind="stable")
        counts = np.bincount(cells_all, minlength=self.n_local)
        self.cend = np.cumsum(counts)
        self.cstart = self.cend - counts
        if halo_src is None:
            halo_src = np.full(len(halo_r), -1, dtype=np.int64)
        self.src_map = np.concatenate(
            [np.arange(self.n_owned, dtype=np.int64), halo_src])
        self._lcell = lcell

    def _require_loaded(self):
        if self.pos is None:
            raise LjmdError("grid has no molecules loaded; call load() first")

    def occupancy(self):
        """Owned-region occupancy as a dense (dims) int64 array (x fastest)."""
        self._require_loaded()
        counts = np.bincount(self._lcell, minlength=self.n_local)
        full = counts.reshape(self.m[2], self.m[1], self.m[0])
        return full[1:-1, 1:-1, 1:-1]

    def pair_arrays(self, cutoff=None):
        """All unordered interacting pairs (i, j, r2) with r2 < cutoff^2.

        Indices refer to the loaded combined arrays; map halo members back
        through src_map when the source is local.  Each pair appears once.
        """
        self._require_loaded()
        rc = self.cutoff if cutoff is None else float(cutoff)
        cap = max(64, 80 * self.n_owned)
        while True:
            out_i = np.empty(cap, np.int64)
            out_j = np.empty(cap, np.int64)
            out_r2 = np.empty(cap, np.float64)
            n = _kernels.cell_pairs(
                self.pos, self.srt, self.cstart, self.cend,
                self.m[0], self.m[1], self.m[2], self.gcell, rc * rc,
                out_i, out_j, out_r2)
            if n <= cap:
                return out_i[:n], out_j[:n], out_r2[:n]
            cap = n

    def compute_forces(self, table):
        """LJ forces on owned molecules; returns (forces, u_pot, virial).

        Raises OverlapError when any pair is closer than the overlap
        threshold.
        """
        self._require_loaded()
        forces = np.zeros_like(self.pos)
        sig2 = table.sigma_ij * table.sigma_ij
        u, w, n_ovl = _kernels.cell_forces(
            self.pos, self.spec, self.srt, self.cstart, self.cend,
            self.m[0], self.m[1], self.m[2], self.gcell,
            sig2, table.epsilon_ij, table.u_shift_ij,
            self.cutoff * self.cutoff, forces)
        if n_ovl:
            raise OverlapError(f"{n_ovl} overlapping pair(s) in force pass")
        return forces[:self.n_owned], u, w


def for_each_pair(grid, visit):
    """Call visit(i, j, r2) for every interacting pair exactly once.

    i and j are indices into the grid's owned molecule order where the
    member is owned (halo members are mapped back through src_map when the
    copy originated locally, otherwise reported as the negative combined
    index minus one).
    """
    out_i, out_j, out_r2 = grid.pair_arrays()
    src = grid.src_map
    for i, j, r2 in zip(out_i, out_j, out_r2):
        si = src[i]
        sj = src[j]
        visit(int(si if si >= 0 else -int(i) - 1),
              int(sj if sj >= 0 else -int(j) - 1),
              float(r2))


class HaloPlan:
    """Where a grid's halo cells are sourced from, grouped by source worker.

    For each source worker: the source global cells, the destination local
    cells and the per-cell position shift to apply to the copies.  Built
    from geometry only, so every worker can compute every other worker's
    plan from the shared partition.
    """

    def __init__(self, grid, cell_owner):
        by_src = {}
        m = grid.m
        nc = grid.nc
        for iz in range(m[2]):
            for iy in range(m[1]):
                for ix in range(m[0]):
                    interior = (1 <= ix < m[0] - 1 and 1 <= iy < m[1] - 1
                                and 1 <= iz < m[2] - 1)
                    if interior:
                        continue
                    lc = grid.local_linear(ix, iy, iz)
                    g = grid.gcell[lc]
                    if g < 0:
                        continue
                    shift = (grid._axis_shift[0][ix],
                             grid._axis_shift[1][iy],
                             grid._axis_shift[2][iz])
                    src = int(cell_owner[g])
                    by_src.setdefault(src, []).append((g, lc, shift))
        self.by_src = {}
        for src in sorted(by_src):
            entries = by_src[src]
            self.by_src[src] = (
                np.array([e[0] for e in entries], dtype=np.int64),
                np.array([e[1] for e in entries], dtype=np.int64),
                np.array([e[2] for e in entries], dtype=np.float64),
            )

    @property
    def sources(self):
        return list(self.by_src)


def gather_cells(order, cstart, cend, cells):
    """Indices (into the pre-sort array) of all molecules in the given cells.

    Vectorized multi-range gather: returns (indices, counts_per_cell).
    """
    starts = cstart[cells]
    counts = (cend[cells] - starts).astype(np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, np.int64), counts
    cum = np.concatenate([[0], np.cumsum(counts)[:-1]])
    within = np.arange(total, dtype=np.int64) - np.repeat(cum, counts)
    return order[np.repeat(starts, counts) + within], counts


def serial_forces(positions, species, table, domain):
    """Single-region force evaluation: the whole domain as one owned box.

    Periodic interactions run through self-image halo copies, exactly as a
    worker does.  Returns (forces, u_pot, virial).
    """
    grid = CellGrid(domain, table.cutoff)
    load_self_halo(grid, positions, species)
    return grid.compute_forces(table)


def load_self_halo(grid, positions, species):
    """Load a whole-domain grid, building its halo from its own images."""
    lcell = grid.assign(positions)
    order = np.argsort(lcell, kind="stable")
    counts = np.bincount(lcell, minlength=grid.n_local)
    cend = np.cumsum(counts)
    cstart = cend - counts
    plan = HaloPlan(grid, np.zeros(int(np.prod(grid.nc)), dtype=np.int64))
    if plan.sources:
        src_g, dest_l, shifts = plan.by_src[0]
        g3 = np.stack([src_g % grid.nc[0],
                       (src_g // grid.nc[0]) % grid.nc[1],
                       src_g // (grid.nc[0] * grid.nc[1])], axis=1)
        src_l = grid.owned_local_of_global(g3)
        idx, per_cell = gather_cells(order, cstart, cend, src_l)
        halo_r = positions[idx] + np.repeat(shifts, per_cell, axis=0)
        halo_spec = np.asarray(species)[idx]
        halo_lcell = np.repeat(dest_l, per_cell)
        grid.load(positions, species, halo_r, halo_spec, halo_lcell,
                  halo_src=idx)
    else:
        grid.load(positions, species)
    return grid
