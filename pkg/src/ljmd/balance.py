"""Domain decomposition over the global cell grid.

Two strategies share one recursive-bisection engine: a load-ignoring uniform
split (unit cost per cell, giving near-equal volumes) and the dynamic kd
split driven by a per-cell cost field estimated from occupancies.  Splits
are axis-aligned planes on cell boundaries with strictly alternating axes
(x, y, z, x, ...); every worker can recompute the identical tree from the
same load field, so no coordination is needed beyond gathering occupancies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PartitionError


def pair_cost_field(occupancy, wrap=(True, True, True)):
    """Pair-interaction work proxy per cell from occupancy counts.

    cost(c) = n_c (n_c - 1) / 2 + 1/2 * sum over the 26-neighborhood of
    n_c * n_c'.  Neighborhoods wrap on periodic axes and zero-pad on the
    rest.  Shape (nx, ny, nz), indexed [ix, iy, iz].
    """
    occ = np.asarray(occupancy, dtype=np.float64)
    if np.any(occ < 0) or not np.all(np.isfinite(occ)):
        raise ValueError("occupancy must be finite and non-negative")
    box = occ.copy()
    for ax in range(3):
        if wrap[ax]:
            box = box + np.roll(box, 1, axis=ax) + np.roll(box, -1, axis=ax)
        else:
            up = np.zeros_like(box)
            dn = np.zeros_like(box)
            sl_lo = [slice(None)] * 3
            sl_hi = [slice(None)] * 3
            sl_lo[ax] = slice(1, None)
            sl_hi[ax] = slice(None, -1)
            up[tuple(sl_hi)] = box[tuple(sl_lo)]
            dn[tuple(sl_lo)] = box[tuple(sl_hi)]
            box = box + up + dn
    neigh = box - occ
    return occ * (occ - 1.0) / 2.0 + 0.5 * occ * neigh


def estimate_loads(occupancy, wrap=(True, True, True)):
    """CellLoadField from live cell occupancies (see pair_cost_field)."""
    return pair_cost_field(occupancy, wrap)


@dataclass
class Leaf:
    worker: int
    lo: np.ndarray  # inclusive cell index, shape (3,)
    hi: np.ndarray  # exclusive


@dataclass
class Split:
    axis: int
    pos: int  # cells [lo, pos) go left, [pos, hi) right on `axis`
    n_left: int
    n_right: int
    left: object
    right: object


class PartitionTree:
    """Binary tree of alternating-axis splits assigning cell boxes to workers."""

    def __init__(self, root, grid_dims, n_workers, axis0):
        self.root = root
        self.grid_dims = np.asarray(grid_dims, dtype=np.int64)
        self.n_workers = int(n_workers)
        self.axis0 = int(axis0)

    def leaves(self):
        """Leaves ordered by worker id."""
        out = []

        def rec(node):
            if isinstance(node, Leaf):
                out.append(node)
            else:
                rec(node.left)
                rec(node.right)

        rec(self.root)
        out.sort(key=lambda l: l.worker)
        return out

    def cell_owner(self):
        """Dense (nx, ny, nz) array mapping each global cell to its worker."""
        owner = np.full(tuple(self.grid_dims), -1, dtype=np.int32)
        for leaf in self.leaves():
            owner[leaf.lo[0]:leaf.hi[0], leaf.lo[1]:leaf.hi[1],
                  leaf.lo[2]:leaf.hi[2]] = leaf.worker
        return owner

    def cell_owner_flat(self):
        """Owner per global linear cell index (x fastest), matching CellGrid."""
        return np.ascontiguousarray(self.cell_owner().transpose(2, 1, 0)).ravel()

    def __eq__(self, other):
        if not isinstance(other, PartitionTree):
            return NotImplemented
        if self.n_workers != other.n_workers or \
                not np.array_equal(self.grid_dims, other.grid_dims):
            return False
        return np.array_equal(self.cell_owner(), other.cell_owner())


def _bisect(loads, lo, hi, n_workers, axis, worker0):
    if n_workers == 1:
        return Leaf(worker0, lo.copy(), hi.copy())
    n_left = n_workers // 2
    n_right = n_workers - n_left
    width = hi[axis] - lo[axis]
    other = int(np.prod(hi - lo)) // max(width, 1)
    # per-slab load along the split axis, restricted to this box
    sl = [slice(lo[i], hi[i]) for i in range(3)]
    region = loads[tuple(sl)]
    slab = region.sum(axis=tuple(i for i in range(3) if i != axis))
    prefix = np.concatenate([[0.0], np.cumsum(slab)])
    total = prefix[-1]

    best = None
    for s in range(1, width):
        cells_l = s * other
        cells_r = (width - s) * other
        if cells_l < n_left or cells_r < n_right:
            continue
        load_l = prefix[s]
        load_r = total - load_l
        cost = max(load_l / n_left, load_r / n_right)
        if best is None or cost < best[0]:
            best = (cost, s)
    if best is None:
        raise PartitionError(
            f"cannot split {width} cells on axis {axis} for "
            f"{n_workers} workers")
    s = best[1]
    mid = lo.copy()
    mid[axis] = lo[axis] + s
    hi_left = hi.copy()
    hi_left[axis] = mid[axis]
    nxt = (axis + 1) % 3
    left = _bisect(loads, lo, hi_left, n_left, nxt, worker0)
    right = _bisect(loads, mid, hi, n_right, nxt, worker0 + n_left)
    return Split(axis, int(mid[axis]), n_left, n_right, left, right)


def kd_partition(loads, n_workers, axis0=0):
    """Load-balancing recursive bisection of the cell grid.

    At each level the worker count is halved (floor/ceil) and the plane on
    the current axis minimizing max(load_L / n_L, load_R / n_R) is chosen by
    exhaustive scan over cell boundaries; ties break toward the lower index.
    """
    loads = np.asarray(loads, dtype=np.float64)
    if loads.ndim != 3:
        raise PartitionError("load field must be a 3-d array")
    if n_workers < 1:
        raise PartitionError("worker count must be >= 1")
    if n_workers > loads.size:
        raise PartitionError(
            f"{n_workers} workers exceed {loads.size} cells")
    lo = np.zeros(3, dtype=np.int64)
    hi = np.array(loads.shape, dtype=np.int64)
    root = _bisect(loads, lo, hi, int(n_workers), int(axis0) % 3, 0)
    return PartitionTree(root, loads.shape, n_workers, axis0)


def uniform_partition(grid_dims, n_workers, axis0=0):
    """Near-equal-volume decomposition ignoring loads (unit cost per cell)."""
    ones = np.ones(tuple(grid_dims), dtype=np.float64)
    return kd_partition(ones, n_workers, axis0)


@dataclass
class ImbalanceReport:
    """Per-worker loads and the max/mean imbalance factor (ideal = 1)."""

    per_worker: np.ndarray
    max_load: float
    mean_load: float
    imbalance: float


def measure_imbalance(tree, loads):
    """Sum the load field over each leaf box; imbalance = max / mean."""
    loads = np.asarray(loads, dtype=np.float64)
    per = np.zeros(tree.n_workers)
    for leaf in tree.leaves():
        per[leaf.worker] = loads[leaf.lo[0]:leaf.hi[0],
                                 leaf.lo[1]:leaf.hi[1],
                                 leaf.lo[2]:leaf.hi[2]].sum()
    mx = float(per.max())
    mean = float(per.mean())
    imb = mx / mean if mean > 0 else 1.0
    return ImbalanceReport(per, mx, mean, imb)


def should_rebalance(step, interval, last_imbalance, threshold):
    """Rebalance on the fixed interval or when imbalance breached the threshold."""
    if interval < 1:
        raise ValueError("rebalance interval must be >= 1")
    return step % interval == 0 or last_imbalance > threshold
