"""Numerical kernels for batched trajectory integration.

Two interchangeable implementations of the per-path propagation and
cost-accumulation loop exist: a compiled extension (``mjlq.sim._kernels``)
and a vectorized NumPy fallback (``mjlq.sim._kernels_py``).  Selection
happens at import time; set ``MJLQ_BACKEND=numpy`` or ``MJLQ_BACKEND=cython``
to force one side (forcing the compiled side raises ImportError when the
extension is unavailable).

Both backends consume the same pre-computed sub-step propagators, produced
here by a batched scaling-and-squaring matrix exponential.  The propagation
results are a pure function of the inputs: each path's accumulation touches
only that path's slots, so worker count never changes any output bit.
"""

from __future__ import annotations

import os
import threading

import numpy as np

_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
# Largest 1-norm for which the degree-13 Pade approximant meets double
# precision without scaling.
_THETA13 = 5.371920351148152

_EXPM_CHUNK = 65536


def _select_backend():
    choice = os.environ.get("MJLQ_BACKEND", "auto").strip().lower() or "auto"
    if choice not in ("auto", "cython", "numpy"):
        raise ValueError(
            f"MJLQ_BACKEND must be 'auto', 'cython', or 'numpy', got {choice!r}"
        )
    if choice == "numpy":
        from . import _kernels_py

        return _kernels_py, "numpy"
    try:
        from . import _kernels

        return _kernels, "cython"
    except ImportError:
        if choice == "cython":
            raise
        from . import _kernels_py

        return _kernels_py, "numpy"


_IMPL, _BACKEND_NAME = _select_backend()


def backend_name() -> str:
    """Name of the active propagation backend: 'cython' or 'numpy'."""
    return _BACKEND_NAME


def _expm_block(A: np.ndarray) -> np.ndarray:
    # Degree-13 Pade with per-element scaling and squaring, applied to a
    # stack of small square matrices at once.
    P, d, _ = A.shape
    norm1 = np.abs(A).sum(axis=-2).max(axis=-1)
    with np.errstate(divide="ignore"):
        s = np.ceil(np.log2(norm1 / _THETA13))
    s = np.where(norm1 > _THETA13, s, 0.0).astype(np.int64)
    Ah = A / np.exp2(s).reshape(P, 1, 1)

    b = _PADE13
    eye = np.broadcast_to(np.eye(d), (P, d, d))
    A2 = Ah @ Ah
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = Ah @ (
        A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
        + b[7] * A6
        + b[5] * A4
        + b[3] * A2
        + b[1] * eye
    )
    V = (
        A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
        + b[6] * A6
        + b[4] * A4
        + b[2] * A2
        + b[0] * eye
    )
    E = np.linalg.solve(V - U, V + U)
    for k in range(int(s.max(initial=0))):
        m = s > k
        E[m] = E[m] @ E[m]
    return E


def expm_batch(A) -> np.ndarray:
    """Matrix exponential of a stack of square matrices.

    Accepts shape (d, d) or (P, d, d) and returns the same shape.  Large
    stacks are processed in chunks to bound peak memory.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    single = A.ndim == 2
    if single:
        A = A[None]
    if A.ndim != 3 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected a stack of square matrices, got shape {A.shape}")
    P = A.shape[0]
    if P <= _EXPM_CHUNK:
        out = _expm_block(A)
    else:
        out = np.empty_like(A)
        for lo in range(0, P, _EXPM_CHUNK):
            hi = min(lo + _EXPM_CHUNK, P)
            out[lo:hi] = _expm_block(A[lo:hi])
    return out[0] if single else out


def accumulate_costs(
    M: np.ndarray,
    K: np.ndarray,
    xi0: np.ndarray,
    seg_counts: np.ndarray,
    seg_offsets: np.ndarray,
    seg_regime: np.ndarray,
    seg_dur: np.ndarray,
    seg_nsub: np.ndarray,
    workers: int = 1,
):
    """Integrate quadratic running costs along a batch of regime paths.

    Parameters
    ----------
    M : (D, d, d) array
        Per-regime closed-loop drift of the (possibly augmented) state.
    K : (S, D, d, d) array
        Per-regime symmetric cost weights, one stack per cost channel.
    xi0 : (d,) array
        Shared initial state of every path.
    seg_counts, seg_offsets : int arrays
        seg_counts[p] segments belong to path p, stored flat starting at
        seg_offsets[p].
    seg_regime, seg_dur, seg_nsub : flat per-segment arrays
        Regime index, duration, and (even) Simpson sub-interval count.

    Returns
    -------
    costs : (S, N) array
        Composite-Simpson integral of each cost channel along each path.
    xi_T : (N, d) array
        State of each path at the end of its last segment.
    """
    M = np.ascontiguousarray(M, dtype=np.float64)
    K = np.ascontiguousarray(K, dtype=np.float64)
    xi0 = np.ascontiguousarray(xi0, dtype=np.float64)
    seg_counts = np.ascontiguousarray(seg_counts, dtype=np.int64)
    seg_offsets = np.ascontiguousarray(seg_offsets, dtype=np.int64)
    seg_regime = np.ascontiguousarray(seg_regime, dtype=np.int64)
    seg_dur = np.ascontiguousarray(seg_dur, dtype=np.float64)
    seg_nsub = np.ascontiguousarray(seg_nsub, dtype=np.int64)

    N = seg_counts.shape[0]
    S, d = K.shape[0], xi0.shape[0]
    costs = np.zeros((S, N))
    xi_T = np.empty((N, d))
    if N == 0:
        return costs, xi_T

    with np.errstate(invalid="ignore"):
        dt = np.where(seg_nsub > 0, seg_dur / seg_nsub, 0.0)
    Eh = expm_batch(M[seg_regime] * dt[:, None, None])

    if _BACKEND_NAME == "cython" and workers > 1 and N > 1:
        nthreads = min(int(workers), N)
        bounds = np.linspace(0, N, nthreads + 1).astype(np.int64)
        threads = [
            threading.Thread(
                target=_IMPL.propagate_range,
                args=(
                    Eh,
                    seg_counts,
                    seg_offsets,
                    seg_regime,
                    seg_dur,
                    seg_nsub,
                    K,
                    xi0,
                    int(lo),
                    int(hi),
                    costs,
                    xi_T,
                ),
            )
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    else:
        _IMPL.propagate_range(
            Eh,
            seg_counts,
            seg_offsets,
            seg_regime,
            seg_dur,
            seg_nsub,
            K,
            xi0,
            0,
            N,
            costs,
            xi_T,
        )
    return costs, xi_T
