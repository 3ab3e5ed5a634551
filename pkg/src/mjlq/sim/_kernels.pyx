# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled propagation kernel.

Walks each path sequentially: for every segment, steps the (augmented)
state through the pre-computed sub-step propagator while accumulating the
composite-Simpson quadratic cost for every cost channel.  Paths touch only
their own output slots, so disjoint path ranges may run on concurrent
threads; the function releases the GIL for its whole duration.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

# Stack-buffer capacities; checked before entering the nogil region.
DEF MAX_DIM = 64
DEF MAX_STACKS = 8


def propagate_range(
    double[:, :, ::1] Eh,
    cnp.int64_t[::1] seg_counts,
    cnp.int64_t[::1] seg_offsets,
    cnp.int64_t[::1] seg_regime,
    double[::1] seg_dur,
    cnp.int64_t[::1] seg_nsub,
    double[:, :, :, ::1] K,
    double[::1] xi0,
    Py_ssize_t start,
    Py_ssize_t stop,
    double[:, ::1] out_costs,
    double[:, ::1] out_xi,
):
    """Accumulate Simpson cost integrals for paths in [start, stop)."""
    cdef Py_ssize_t d = xi0.shape[0]
    cdef Py_ssize_t S = K.shape[0]
    if d > MAX_DIM:
        raise ValueError(f"state dimension {d} exceeds compiled limit {MAX_DIM}")
    if S > MAX_STACKS:
        raise ValueError(f"{S} cost channels exceed compiled limit {MAX_STACKS}")
    if stop > seg_counts.shape[0]:
        raise ValueError("path range exceeds batch size")

    cdef double xi[MAX_DIM]
    cdef double tmp[MAX_DIM]
    cdef double seg_acc[MAX_STACKS]
    cdef Py_ssize_t p, r, sidx, off, nseg, reg, j, s, a, b
    cdef cnp.int64_t nsub
    cdef double h3, w, q, row, wh

    with nogil:
        for p in range(start, stop):
            for a in range(d):
                xi[a] = xi0[a]
            off = seg_offsets[p]
            nseg = seg_counts[p]
            for r in range(nseg):
                sidx = off + r
                reg = seg_regime[sidx]
                nsub = seg_nsub[sidx]
                if nsub <= 0:
                    continue
                h3 = seg_dur[sidx] / nsub / 3.0
                for s in range(S):
                    seg_acc[s] = 0.0
                for j in range(nsub + 1):
                    if j == 0 or j == nsub:
                        w = 1.0
                    elif j & 1:
                        w = 4.0
                    else:
                        w = 2.0
                    wh = w * h3
                    for s in range(S):
                        q = 0.0
                        for a in range(d):
                            row = 0.0
                            for b in range(d):
                                row += K[s, reg, a, b] * xi[b]
                            q += xi[a] * row
                        seg_acc[s] += wh * q
                    if j < nsub:
                        for a in range(d):
                            row = 0.0
                            for b in range(d):
                                row += Eh[sidx, a, b] * xi[b]
                            tmp[a] = row
                        for a in range(d):
                            xi[a] = tmp[a]
                for s in range(S):
                    out_costs[s, p] += seg_acc[s]
            for a in range(d):
                out_xi[p, a] = xi[a]
