"""Numba-compiled hot loops: cell-pair forces, pair listing, MC moves.

Conventions shared by all kernels here:

* Molecule arrays are "combined": owned molecules first (indices < n_owned),
  halo copies after.  Halo positions are pre-shifted by their periodic image
  vector, so plain Cartesian distances apply everywhere.
* The local cell grid has one halo layer on every side; local cell (ix, iy,
  iz) is linear index ix + mx*(iy + my*iz); owned cells occupy the open box
  [1, mx-1) x [1, my-1) x [1, mz-1).
* `srt` sorts combined indices by local cell; cell c holds srt[cstart[c]:
  cend[c]].
* `gcell` maps local cells to global cell indices (-1 for void cells beyond
  a non-periodic face).  A pair with one halo member is evaluated by both
  owning workers; its energy and virial are credited only where the owned
  member sits in the lower-indexed global cell.
"""

import numpy as np
from numba import njit

OVERLAP_R2 = 1e-12

# 26 neighbor offsets; the first 13 are the "forward" half used for
# owned-owned cell pairs.
_offsets = []
for dz in (0, 1, -1):
    for dy in (0, 1, -1):
        for dx in (0, 1, -1):
            if dx == 0 and dy == 0 and dz == 0:
                continue
            fwd = (dz > 0) or (dz == 0 and dy > 0) or (dz == 0 and dy == 0 and dx > 0)
            _offsets.append((dx, dy, dz, 1 if fwd else 0))
_offsets.sort(key=lambda t: -t[3])
OFFSETS = np.array([o[:3] for o in _offsets], dtype=np.int64)
N_FORWARD = 13


@njit(cache=True, inline="always")
def _lj(r2, sig2, eps, shift):
    s2 = sig2 / r2
    s6 = s2 * s2 * s2
    u = 4.0 * eps * (s6 * s6 - s6) - shift
    fscal = 24.0 * eps * (2.0 * s6 * s6 - s6) / r2
    return u, fscal


@njit(cache=True)
def cell_forces(pos, spec, srt, cstart, cend, mx, my, mz, gcell,
                sig2_tab, eps_tab, shift_tab, rc2, forces):
    """Accumulate LJ forces on combined molecules; return (u_pot, virial, n_overlap).

    Forces on halo rows are never written; `forces` must be zeroed by the
    caller and have the combined length.
    """
    u_sum = 0.0
    w_sum = 0.0
    n_overlap = 0
    for iz in range(1, mz - 1):
        for iy in range(1, my - 1):
            for ix in range(1, mx - 1):
                c = ix + mx * (iy + my * iz)
                a0 = cstart[c]
                a1 = cend[c]
                # pairs inside the home cell (all owned)
                for a in range(a0, a1):
                    i = srt[a]
                    xi = pos[i, 0]
                    yi = pos[i, 1]
                    zi = pos[i, 2]
                    si = spec[i]
                    for b in range(a + 1, a1):
                        j = srt[b]
                        dx = xi - pos[j, 0]
                        dy = yi - pos[j, 1]
                        dz = zi - pos[j, 2]
                        r2 = dx * dx + dy * dy + dz * dz
                        if r2 >= rc2:
                            continue
                        if r2 < OVERLAP_R2:
                            n_overlap += 1
                            continue
                        sj = spec[j]
                        u, fs = _lj(r2, sig2_tab[si, sj], eps_tab[si, sj],
                                    shift_tab[si, sj])
                        forces[i, 0] += fs * dx
                        forces[i, 1] += fs * dy
                        forces[i, 2] += fs * dz
                        forces[j, 0] -= fs * dx
                        forces[j, 1] -= fs * dy
                        forces[j, 2] -= fs * dz
                        u_sum += u
                        w_sum += fs * r2
                # pairs with neighbor cells
                for o in range(26):
                    jx = ix + OFFSETS[o, 0]
                    jy = iy + OFFSETS[o, 1]
                    jz = iz + OFFSETS[o, 2]
                    nb_owned = (1 <= jx < mx - 1) and (1 <= jy < my - 1) \
                        and (1 <= jz < mz - 1)
                    if nb_owned and o >= N_FORWARD:
                        continue
                    nc = jx + mx * (jy + my * jz)
                    b0 = cstart[nc]
                    b1 = cend[nc]
                    if b0 == b1:
                        continue
                    emit = nb_owned or (gcell[c] < gcell[nc])
                    for a in range(a0, a1):
                        i = srt[a]
                        xi = pos[i, 0]
                        yi = pos[i, 1]
                        zi = pos[i, 2]
                        si = spec[i]
                        for b in range(b0, b1):
                            j = srt[b]
                            dx = xi - pos[j, 0]
                            dy = yi - pos[j, 1]
                            dz = zi - pos[j, 2]
                            r2 = dx * dx + dy * dy + dz * dz
                            if r2 >= rc2:
                                continue
                            if r2 < OVERLAP_R2:
                                n_overlap += 1
                                continue
                            sj = spec[j]
                            u, fs = _lj(r2, sig2_tab[si, sj], eps_tab[si, sj],
                                        shift_tab[si, sj])
                            forces[i, 0] += fs * dx
                            forces[i, 1] += fs * dy
                            forces[i, 2] += fs * dz
                            if nb_owned:
                                forces[j, 0] -= fs * dx
                                forces[j, 1] -= fs * dy
                                forces[j, 2] -= fs * dz
                            if emit:
                                u_sum += u
                                w_sum += fs * r2
    return u_sum, w_sum, n_overlap


@njit(cache=True)
def cell_pairs(pos, srt, cstart, cend, mx, my, mz, gcell, rc2,
               out_i, out_j, out_r2):
    """List each interacting pair (r2 < rc2) exactly once.

    Pairs are written to the out arrays when they fit; the return value is
    the total pair count, so callers can re-run with larger buffers.  The
    dedupe rule matches cell_forces' energy accounting.
    """
    cap = out_i.shape[0]
    k = 0
    for iz in range(1, mz - 1):
        for iy in range(1, my - 1):
            for ix in range(1, mx - 1):
                c = ix + mx * (iy + my * iz)
                a0 = cstart[c]
                a1 = cend[c]
                for a in range(a0, a1):
                    i = srt[a]
                    for b in range(a + 1, a1):
                        j = srt[b]
                        dx = pos[i, 0] - pos[j, 0]
                        dy = pos[i, 1] - pos[j, 1]
                        dz = pos[i, 2] - pos[j, 2]
                        r2 = dx * dx + dy * dy + dz * dz
                        if r2 < rc2:
                            if k < cap:
                                out_i[k] = i
                                out_j[k] = j
                                out_r2[k] = r2
                            k += 1
                for o in range(26):
                    jx = ix + OFFSETS[o, 0]
                    jy = iy + OFFSETS[o, 1]
                    jz = iz + OFFSETS[o, 2]
                    nb_owned = (1 <= jx < mx - 1) and (1 <= jy < my - 1) \
                        and (1 <= jz < mz - 1)
                    if nb_owned and o >= N_FORWARD:
                        continue
                    nc = jx + mx * (jy + my * jz)
                    if not nb_owned and gcell[c] >= gcell[nc]:
                        continue
                    for a in range(a0, a1):
                        i = srt[a]
                        for b in range(cstart[nc], cend[nc]):
                            j = srt[b]
                            dx = pos[i, 0] - pos[j, 0]
                            dy = pos[i, 1] - pos[j, 1]
                            dz = pos[i, 2] - pos[j, 2]
                            r2 = dx * dx + dy * dy + dz * dz
                            if r2 < rc2:
                                if k < cap:
                                    out_i[k] = i
                                    out_j[k] = j
                                    out_r2[k] = r2
                                k += 1
    return k


# ---------------------------------------------------------------------------
# Monte Carlo kernels: serial whole-domain grid with head/next linked lists
# and minimum-image distances (no halo copies).
# ---------------------------------------------------------------------------

@njit(cache=True)
def mc_cell_of(x, y, z, clen, ncx, ncy, ncz):
    cx = min(int(x / clen[0]), ncx - 1)
    cy = min(int(y / clen[1]), ncy - 1)
    cz = min(int(z / clen[2]), ncz - 1)
    return cx + ncx * (cy + ncy * cz)


@njit(cache=True)
def mc_local_energy(x, y, z, sp, excl, pos, spec, head, nxt,
                    clen, ncx, ncy, ncz, L, periodic,
                    sig2_tab, eps_tab, shift_tab, rc2):
    """Truncated-shifted LJ energy of a point against all neighbors.

    Returns (u, overlap_flag).  `excl` is the molecule index to skip (its
    old self), or -1.
    """
    u = 0.0
    overlap = 0
    cx = min(int(x / clen[0]), ncx - 1)
    cy = min(int(y / clen[1]), ncy - 1)
    cz = min(int(z / clen[2]), ncz - 1)
    for oz in range(-1, 2):
        gz = cz + oz
        if periodic[2]:
            gz = gz % ncz
        elif gz < 0 or gz >= ncz:
            continue
        for oy in range(-1, 2):
            gy = cy + oy
            if periodic[1]:
                gy = gy % ncy
            elif gy < 0 or gy >= ncy:
                continue
            for ox in range(-1, 2):
                gx = cx + ox
                if periodic[0]:
                    gx = gx % ncx
                elif gx < 0 or gx >= ncx:
                    continue
                j = head[gx + ncx * (gy + ncy * gz)]
                while j >= 0:
                    if j != excl:
                        dx = x - pos[j, 0]
                        dy = y - pos[j, 1]
                        dz = z - pos[j, 2]
                        if periodic[0]:
                            dx -= L[0] * np.floor(dx / L[0] + 0.5)
                        if periodic[1]:
                            dy -= L[1] * np.floor(dy / L[1] + 0.5)
                        if periodic[2]:
                            dz -= L[2] * np.floor(dz / L[2] + 0.5)
                        r2 = dx * dx + dy * dy + dz * dz
                        if r2 < rc2:
                            if r2 < OVERLAP_R2:
                                overlap = 1
                            else:
                                sj = spec[j]
                                uu, _ = _lj(r2, sig2_tab[sp, sj],
                                            eps_tab[sp, sj], shift_tab[sp, sj])
                                u += uu
                    j = nxt[j]
    return u, overlap


@njit(cache=True)
def mc_wall_energy(z, weps, wsig, wzcut, wshift):
    if z >= wzcut:
        return 0.0
    s3 = (wsig / z) ** 3
    return weps * ((2.0 / 15.0) * s3 ** 3 - s3) - wshift


@njit(cache=True)
def mc_sweep_kernel(pos, spec, head, nxt, clen, ncx, ncy, ncz, L, periodic,
                    sig2_tab, eps_tab, shift_tab, rc2, temperature,
                    max_disp, mol_idx, disp, acc_rand,
                    has_wall, weps, wsig, wzcut, wshift):
    """Run one batch of single-molecule Metropolis moves in place.

    mol_idx, disp (n,3 in [-1,1)) and acc_rand (n, in [0,1)) are pre-drawn
    random numbers; the kernel is fully deterministic given them.  Returns
    (delta_u_total, n_accepted, n_overlap_rejects).
    """
    du_total = 0.0
    n_acc = 0
    n_ovl = 0
    n_try = mol_idx.shape[0]
    for t in range(n_try):
        i = mol_idx[t]
        x0 = pos[i, 0]
        y0 = pos[i, 1]
        z0 = pos[i, 2]
        sp = spec[i]
        x1 = x0 + max_disp * disp[t, 0]
        y1 = y0 + max_disp * disp[t, 1]
        z1 = z0 + max_disp * disp[t, 2]
        reject_bounds = False
        if periodic[0]:
            x1 -= L[0] * np.floor(x1 / L[0])
            if x1 >= L[0]:
                x1 -= L[0]
        elif x1 < 0.0 or x1 > L[0]:
            reject_bounds = True
        if periodic[1]:
            y1 -= L[1] * np.floor(y1 / L[1])
            if y1 >= L[1]:
                y1 -= L[1]
        elif y1 < 0.0 or y1 > L[1]:
            reject_bounds = True
        if periodic[2]:
            z1 -= L[2] * np.floor(z1 / L[2])
            if z1 >= L[2]:
                z1 -= L[2]
        elif z1 <= 0.0 or z1 > L[2]:
            # z <= 0 with a wall means escape; treat as infinite energy
            reject_bounds = True
        if reject_bounds:
            continue

        u_old, ovl_old = mc_local_energy(
            x0, y0, z0, sp, i, pos, spec, head, nxt, clen, ncx, ncy, ncz,
            L, periodic, sig2_tab, eps_tab, shift_tab, rc2)
        u_new, ovl_new = mc_local_energy(
            x1, y1, z1, sp, i, pos, spec, head, nxt, clen, ncx, ncy, ncz,
            L, periodic, sig2_tab, eps_tab, shift_tab, rc2)
        if has_wall:
            u_old += mc_wall_energy(z0, weps, wsig, wzcut, wshift)
            u_new += mc_wall_energy(z1, weps, wsig, wzcut, wshift)
        if ovl_new:
            n_ovl += 1
            continue
        du = u_new - u_old
        if du > 0.0:
            if acc_rand[t] >= np.exp(-du / temperature):
                continue
        # accepted: move molecule and relink its cell
        c_old = mc_cell_of(x0, y0, z0, clen, ncx, ncy, ncz)
        c_new = mc_cell_of(x1, y1, z1, clen, ncx, ncy, ncz)
        pos[i, 0] = x1
        pos[i, 1] = y1
        pos[i, 2] = z1
        if c_old != c_new:
            j = head[c_old]
            if j == i:
                head[c_old] = nxt[i]
            else:
                while nxt[j] != i:
                    j = nxt[j]
                nxt[j] = nxt[i]
            nxt[i] = head[c_new]
            head[c_new] = i
        du_total += du
        n_acc += 1
    return du_total, n_acc, n_ovl


@njit(cache=True)
def mc_total_energy(pos, spec, head, nxt, clen, ncx, ncy, ncz, L, periodic,
                    sig2_tab, eps_tab, shift_tab, rc2):
    """Total pair energy and virial of an MC configuration (each pair once)."""
    n = pos.shape[0]
    u = 0.0
    w = 0.0
    for i in range(n):
        ui, _ = mc_local_energy(pos[i, 0], pos[i, 1], pos[i, 2], spec[i], i,
                                pos, spec, head, nxt, clen, ncx, ncy, ncz,
                                L, periodic, sig2_tab, eps_tab, shift_tab, rc2)
        u += ui
    # each pair counted twice above; the virial needs its own pass
    u *= 0.5
    for i in range(n):
        cx = min(int(pos[i, 0] / clen[0]), ncx - 1)
        cy = min(int(pos[i, 1] / clen[1]), ncy - 1)
        cz = min(int(pos[i, 2] / clen[2]), ncz - 1)
        for oz in range(-1, 2):
            gz = cz + oz
            if periodic[2]:
                gz = gz % ncz
            elif gz < 0 or gz >= ncz:
                continue
            for oy in range(-1, 2):
                gy = cy + oy
                if periodic[1]:
                    gy = gy % ncy
                elif gy < 0 or gy >= ncy:
                    continue
                for ox in range(-1, 2):
                    gx = cx + ox
                    if periodic[0]:
                        gx = gx % ncx
                    elif gx < 0 or gx >= ncx:
                        continue
                    j = head[gx + ncx * (gy + ncy * gz)]
                    while j >= 0:
                        if j > i:
                            dx = pos[i, 0] - pos[j, 0]
                            dy = pos[i, 1] - pos[j, 1]
                            dz = pos[i, 2] - pos[j, 2]
                            if periodic[0]:
                                dx -= L[0] * np.floor(dx / L[0] + 0.5)
                            if periodic[1]:
                                dy -= L[1] * np.floor(dy / L[1] + 0.5)
                            if periodic[2]:
                                dz -= L[2] * np.floor(dz / L[2] + 0.5)
                            r2 = dx * dx + dy * dy + dz * dz
                            if OVERLAP_R2 <= r2 < rc2:
                                si = spec[i]
                                sj = spec[j]
                                _, fs = _lj(r2, sig2_tab[si, sj],
                                            eps_tab[si, sj], shift_tab[si, sj])
                                w += fs * r2
                        j = nxt[j]
    return u, w
