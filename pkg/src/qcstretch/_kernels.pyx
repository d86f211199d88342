# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled descent kernel: same contract as _kernels_py, scalar loops.

The hot inner loop of the whole package is the per-point tree descent of the
composed map (grid lookup, region classification, power map, unfold).  This
module keeps it in C; _kernels_py is the importable fallback.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, floor, log, sin, sqrt

cnp.import_array()

KIND_ESCAPE = 0
KIND_ANNULUS = 1
KIND_INTERIOR = 2


cdef inline Py_ssize_t _bisect(const long long[:] keys, Py_ssize_t lo, Py_ssize_t hi,
                               long long key) nogil:
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


def descend_batch(data, gen0, node0, p0, bint strict=False):
    cdef const double[:] slot_cx = data.slot_cx
    cdef const double[:] slot_cy = data.slot_cy
    cdef const double[:] slot_R = data.slot_R
    cdef const int[:] slot_fam = data.slot_fam
    cdef const double[:] grid_cell = data.grid_cell
    cdef const long long[:] grid_stride = data.grid_stride
    cdef const long long[:] grid_slot_base = data.grid_slot_base
    cdef const long long[:] grid_key_off = data.grid_key_off
    cdef const long long[:] grid_item_off = data.grid_item_off
    cdef const long long[:] grid_keys = data.grid_keys
    cdef const long long[:] grid_starts = data.grid_starts
    cdef const int[:] grid_items = data.grid_items
    cdef const long long[:] gen_grid_off = data.gen_grid_off
    cdef const long long[:] node_childbase = data.node_childbase
    cdef const double[:] node_sigKR = data.node_sigKR
    cdef double complex[:] node_unfold = data.node_unfold
    cdef int depth = data.depth
    cdef double a_re = data.a_re
    cdef double b_im = data.b_im
    cdef double budget = data.strict_budget

    gen0 = np.ascontiguousarray(gen0, dtype=np.int64)
    node0 = np.ascontiguousarray(node0, dtype=np.int64)
    p0 = np.ascontiguousarray(p0, dtype=np.complex128)
    cdef const long long[:] g0 = gen0
    cdef const long long[:] n0 = node0
    cdef const double complex[:] pp = p0
    cdef Py_ssize_t n = pp.shape[0]

    out_v = np.zeros(n, dtype=np.complex128)
    out_gen = np.zeros(n, dtype=np.int64)
    out_node = np.zeros(n, dtype=np.int64)
    out_kind = np.zeros(n, dtype=np.int8)
    out_ref = np.zeros(n, dtype=np.uint8)
    cdef double complex[:] v_mv = out_v
    cdef long long[:] eg_mv = out_gen
    cdef long long[:] en_mv = out_node
    cdef signed char[:] kd_mv = out_kind
    cdef unsigned char[:] rf_mv = out_ref

    cdef Py_ssize_t i, gi, k0, k1, pos, s0, a, b, j
    cdef long long gen, node, child, slot, stride, key, ix, iy
    cdef double complex p, U, Z, w, zeta, fac
    cdef double px, py, rho, R, sKR, cell, dx, dy, lr, mag, ph, prec
    cdef int kind
    cdef bint refused, moved

    for i in range(n):
        gen = g0[i]
        node = n0[i]
        p = pp[i]
        U = 1.0 + 0.0j
        Z = 0.0 + 0.0j
        prec = 0.0
        refused = False
        kind = KIND_INTERIOR
        while True:
            if gen >= depth:
                kind = KIND_INTERIOR
                break
            px = p.real
            py = p.imag
            slot = -1
            for gi in range(gen_grid_off[gen], gen_grid_off[gen + 1]):
                cell = grid_cell[gi]
                stride = grid_stride[gi]
                k0 = grid_key_off[gi]
                k1 = grid_key_off[gi + 1]
                if k1 == k0:
                    continue
                ix = <long long> floor((px + 1.0) / cell)
                iy = <long long> floor((py + 1.0) / cell)
                key = (ix + 2) * stride + (iy + 2)
                pos = _bisect(grid_keys, k0, k1, key)
                if pos >= k1 or grid_keys[pos] != key:
                    continue
                s0 = gi + pos  # flat starts index: key_off[gi]+gi + (pos-k0)
                a = grid_starts[s0]
                b = grid_starts[s0 + 1]
                for j in range(a, b):
                    slot = grid_slot_base[gi] + grid_items[grid_item_off[gi] + j]
                    dx = px - slot_cx[slot]
                    dy = py - slot_cy[slot]
                    R = slot_R[slot]
                    if dx * dx + dy * dy < R * R:
                        break
                    slot = -1
                if slot >= 0:
                    break
            if slot < 0:
                kind = KIND_ESCAPE
                break
            zeta.real = slot_cx[slot]
            zeta.imag = slot_cy[slot]
            w = p - zeta
            rho = sqrt(w.real * w.real + w.imag * w.imag)
            R = slot_R[slot]
            child = node_childbase[node] + slot_fam[slot]
            # node_sigKR is sigma^K_bar * R_family: the full inner radius
            sKR = node_sigKR[child]
            if rho > sKR:
                lr = log(rho / R)
                mag = exp((a_re - 1.0) * lr)
                ph = b_im * lr
                fac.real = mag * cos(ph)
                fac.imag = mag * sin(ph)
                p = zeta + w * fac
                gen = gen + 1
                node = child
                kind = KIND_ANNULUS
                break
            Z = Z + U * zeta
            U = U * node_unfold[child]
            p = w / sKR
            node = child
            gen = gen + 1
            if strict:
                prec -= log(sKR)
                if prec > budget:
                    refused = True
                    kind = KIND_INTERIOR
                    break
        v_mv[i] = Z + U * p
        eg_mv[i] = gen
        en_mv[i] = node
        kd_mv[i] = kind
        rf_mv[i] = 1 if refused else 0
    return out_v, out_gen, out_node, out_kind, out_ref.astype(bool)


def kernel_name():
    return "compiled"
