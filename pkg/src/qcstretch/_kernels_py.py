"""Pure-Python (numpy-vectorized) descent kernel.

Reference implementation of the composed-map evaluation; the compiled
extension in ``_kernels.pyx`` computes the same thing point-by-point.  The
descent is level-synchronous: each pass moves every active point down one
generation (inner disk), finishes it (annulus exit or escape), or refuses
it (strict precision budget exhausted).

Exit kinds: 0 escape (not inside any slot of the current frame), 1 annulus
of a generation-(exit_gen) block, 2 interior of a leaf block.
"""

from __future__ import annotations

import numpy as np

KIND_ESCAPE = 0
KIND_ANNULUS = 1
KIND_INTERIOR = 2


def locate_batch(data, gen: int, pts: np.ndarray) -> np.ndarray:
    """Global slot ids of the generation-`gen` disks containing each point (-1 if none)."""
    n = len(pts)
    out = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return out
    undecided = np.arange(n)
    px = pts.real
    py = pts.imag
    for gi in range(int(data.gen_grid_off[gen - 1]), int(data.gen_grid_off[gen])):
        if len(undecided) == 0:
            break
        cell = data.grid_cell[gi]
        stride = data.grid_stride[gi]
        k0 = int(data.grid_key_off[gi])
        k1 = int(data.grid_key_off[gi + 1])
        keys = data.grid_keys[k0:k1]
        if len(keys) == 0:
            continue
        s0 = k0 + gi  # starts array offset (nkeys+1 entries per grid)
        starts = data.grid_starts[s0 : k1 + gi + 1]
        it0 = int(data.grid_item_off[gi])
        base = int(data.grid_slot_base[gi])
        ix = np.floor((px[undecided] + 1.0) / cell).astype(np.int64)
        iy = np.floor((py[undecided] + 1.0) / cell).astype(np.int64)
        key = (ix + 2) * stride + (iy + 2)
        pos = np.searchsorted(keys, key)
        found = (pos < len(keys)) & (keys[np.minimum(pos, len(keys) - 1)] == key)
        if not found.any():
            continue
        who = undecided[found]
        fpos = pos[found]
        a = starts[fpos].copy()
        b = starts[fpos + 1]
        alive = np.ones(len(who), dtype=bool)
        while alive.any():
            has = alive & (a < b)
            if not has.any():
                break
            w = who[has]
            slot = base + data.grid_items[it0 + a[has]].astype(np.int64)
            dx = px[w] - data.slot_cx[slot]
            dy = py[w] - data.slot_cy[slot]
            inside = dx * dx + dy * dy < data.slot_R[slot] ** 2
            hit_rows = np.flatnonzero(has)[inside]
            out[who[hit_rows]] = slot[inside]
            alive[hit_rows] = False
            a[has] += 1
            alive &= a < b
        undecided = undecided[out[undecided] < 0]
    return out


def descend_batch(data, gen0: np.ndarray, node0: np.ndarray, p0: np.ndarray, strict: bool = False):
    """Run the composed map from per-point start frames.

    Returns (v, exit_gen, exit_node, kind, refused) with v the image in each
    point's *starting* frame (normalized coordinates: global similarity phase
    and scale of the start frame divided out).
    """
    n = len(p0)
    p = np.array(p0, dtype=np.complex128)
    gen = np.array(gen0, dtype=np.int64)
    node = np.array(node0, dtype=np.int64)
    U = np.ones(n, dtype=np.complex128)
    Z = np.zeros(n, dtype=np.complex128)
    v = np.zeros(n, dtype=np.complex128)
    exit_gen = np.array(gen0, dtype=np.int64)
    exit_node = np.array(node0, dtype=np.int64)
    kind = np.zeros(n, dtype=np.int8)
    refused = np.zeros(n, dtype=bool)
    prec = np.zeros(n, dtype=np.float64)
    active = np.ones(n, dtype=bool)
    a_re = data.a_re
    b_im = data.b_im
    depth = data.depth

    def finish(idx, vloc, kinds, egen, enode):
        v[idx] = Z[idx] + U[idx] * vloc
        kind[idx] = kinds
        exit_gen[idx] = egen
        exit_node[idx] = enode
        active[idx] = False

    while active.any():
        idx = np.flatnonzero(active)
        at_bottom = gen[idx] >= depth
        if at_bottom.any():
            j = idx[at_bottom]
            finish(j, p[j], KIND_INTERIOR, gen[j], node[j])
            idx = idx[~at_bottom]
        if len(idx) == 0:
            break
        for gv in np.unique(gen[idx]):
            sel = idx[gen[idx] == gv]
            slot = locate_batch(data, int(gv) + 1, p[sel])
            miss = slot < 0
            if miss.any():
                j = sel[miss]
                finish(j, p[j], KIND_ESCAPE, gen[j], node[j])
            hit = sel[~miss]
            if len(hit) == 0:
                continue
            sl = slot[~miss]
            child = data.node_childbase[node[hit]] + data.slot_fam[sl]
            zeta = data.slot_cx[sl] + 1j * data.slot_cy[sl]
            w = p[hit] - zeta
            rho = np.abs(w)
            R = data.slot_R[sl]
            # node_sigKR is sigma^K_bar * R_family: the full inner radius
            sKR = data.node_sigKR[child]
            ann = rho > sKR
            if ann.any():
                j = hit[ann]
                lr = np.log(rho[ann] / R[ann])
                fac = np.exp((a_re - 1.0) * lr) * np.exp(1j * (b_im * lr))
                finish(j, zeta[ann] + w[ann] * fac, KIND_ANNULUS, gv + 1, child[ann])
            inner = ~ann
            if inner.any():
                j = hit[inner]
                scl = sKR[inner]
                Z[j] += U[j] * zeta[inner]
                U[j] *= data.node_unfold[child[inner]]
                p[j] = w[inner] / scl
                node[j] = child[inner]
                gen[j] = gv + 1
                if strict:
                    prec[j] -= np.log(scl)
                    over = prec[j] > data.strict_budget
                    if over.any():
                        jj = j[over]
                        refused[jj] = True
                        finish(jj, p[jj], KIND_INTERIOR, gen[jj], node[jj])
    return v, exit_gen, exit_node, kind, refused


def kernel_name() -> str:
    return "python"
