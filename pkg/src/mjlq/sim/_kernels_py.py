"""Vectorized fallback propagation kernel.

Processes all paths in lockstep over segment ranks (a wavefront): at rank r
every path that still has an r-th segment advances through that segment's
Simpson nodes together.  Per-path arithmetic stays independent slot by slot,
so the results match a sequential per-path loop bit for bit regardless of
which other paths share the batch.
"""

from __future__ import annotations

import numpy as np


def _simpson_weights(j: int, nsub: np.ndarray) -> np.ndarray:
    # Composite-Simpson node weight for node j of a rule with nsub
    # sub-intervals; zero once j lies past a path's last node.
    w = np.where((j == 0) | (j == nsub), 1.0, np.where(j % 2 == 1, 4.0, 2.0))
    return np.where(j > nsub, 0.0, w)


def propagate_range(
    Eh: np.ndarray,
    seg_counts: np.ndarray,
    seg_offsets: np.ndarray,
    seg_regime: np.ndarray,
    seg_dur: np.ndarray,
    seg_nsub: np.ndarray,
    K: np.ndarray,
    xi0: np.ndarray,
    start: int,
    stop: int,
    out_costs: np.ndarray,
    out_xi: np.ndarray,
) -> None:
    """Accumulate Simpson cost integrals for paths in [start, stop)."""
    n = stop - start
    if n <= 0:
        return
    d = xi0.shape[0]
    counts = seg_counts[start:stop]
    xi = np.broadcast_to(xi0, (n, d)).copy()
    local = np.arange(n)
    for r in range(int(counts.max(initial=0))):
        live = local[counts > r]
        sidx = seg_offsets[start + live] + r
        Ehr = Eh[sidx]
        Kl = K[:, seg_regime[sidx]]
        nsub = seg_nsub[sidx]
        h3 = np.where(nsub > 0, seg_dur[sidx] / np.maximum(nsub, 1), 0.0) / 3.0
        xl = xi[live]
        acc = np.zeros((K.shape[0], live.size))
        jmax = int(nsub.max(initial=0))
        for j in range(jmax + 1):
            w = _simpson_weights(j, nsub)
            f = np.einsum("pa,spab,pb->sp", xl, Kl, xl, optimize=True)
            acc += (w * h3) * f
            if j < jmax:
                adv = j < nsub
                xl[adv] = np.einsum("pab,pb->pa", Ehr[adv], xl[adv], optimize=True)
        out_costs[:, start + live] += acc
        xi[live] = xl
    out_xi[start:stop] = xi
