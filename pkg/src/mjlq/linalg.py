"""Coupled Lyapunov solves and mean-square spectral tests.

Everything downstream reduces to the regime-coupled Lyapunov equation

    P(i) A(i) + A(i)^T P(i) + sum_j pi_ij P(j) + W(i) = 0,   i = 1..D,

solved here directly in symmetric-vectorized coordinates: each unknown
block is mapped to a vector of length n(n+1)/2 (off-diagonal entries
scaled by sqrt(2) so the map is an isometry), the D blocks are stacked,
and the resulting dense square system is solved exactly.  Problem sizes
of interest are tiny, so a dense direct solve with an explicit
singularity screen beats any iterative scheme on determinism.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import SingularOperator
from .model import Generator, validate_generator

logger = logging.getLogger(__name__)

SINGULARITY_RTOL = 1e-12
RESIDUAL_RTOL = 1e-10

_SQRT2 = np.sqrt(2.0)


def svec_width(n: int) -> int:
    """Length of the symmetric vectorization of an n x n matrix."""
    return n * (n + 1) // 2


def svec(M: np.ndarray) -> np.ndarray:
    """Symmetric vectorization (upper triangle, off-diagonal times sqrt 2).

    Applies to one matrix or a stack; the matrix axes must be the last
    two.  Isometric: ||svec(M)||_2 = ||M||_F for symmetric M.
    """
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[-1]
    rows, cols = np.triu_indices(n)
    v = M[..., rows, cols].copy()
    v[..., rows != cols] *= _SQRT2
    return v


def smat(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of svec: rebuild the symmetric n x n matrix (or stack)."""
    v = np.asarray(v, dtype=np.float64)
    rows, cols = np.triu_indices(n)
    scale = np.where(rows == cols, 1.0, 1.0 / _SQRT2)
    M = np.zeros(v.shape[:-1] + (n, n))
    M[..., rows, cols] = v * scale
    M[..., cols, rows] = v * scale
    return M


def _coerce(A, gen) -> tuple[np.ndarray, Generator]:
    gen = validate_generator(gen)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 2:
        A = A[None]
    if A.ndim != 3 or A.shape[0] != gen.D or A.shape[1] != A.shape[2]:
        raise ValueError(
            f"drift family must have shape ({gen.D}, n, n), got {A.shape}"
        )
    return A, gen


def _sym_basis(n: int) -> np.ndarray:
    """Stack of svec basis matrices: smat(e_k) for each coordinate k."""
    w = svec_width(n)
    return smat(np.eye(w), n)


def coupled_lyapunov_operator(A, gen) -> np.ndarray:
    """Dense matrix of P -> (P(i)A(i) + A(i)^T P(i) + sum_j pi_ij P(j))_i.

    Acts on the stacked symmetric vectorization of the family P; shape is
    (D*w, D*w) with w = n(n+1)/2.  Columns are built by applying the map
    to each svec basis element, so symmetry is structural rather than
    imposed after the fact.
    """
    A, gen = _coerce(A, gen)
    D, n = A.shape[0], A.shape[1]
    w = svec_width(n)
    basis = _sym_basis(n)
    op = np.zeros((D * w, D * w))
    eye = np.eye(w)
    for i in range(D):
        action = basis @ A[i] + A[i].T @ basis
        op[i * w : (i + 1) * w, i * w : (i + 1) * w] = svec(action).T
        for j in range(gen.D):
            op[i * w : (i + 1) * w, j * w : (j + 1) * w] += gen.pi[i, j] * eye
    return op


def coupled_lyapunov_solve(A, gen, W) -> np.ndarray:
    """Solve P(i)A(i) + A(i)^T P(i) + sum_j pi_ij P(j) + W(i) = 0.

    Parameters
    ----------
    A : (D, n, n) array_like
        Regime drift matrices.
    gen : Generator or (D, D) array_like
        Chain generator.
    W : (D, n, n) array_like
        Symmetric right-hand sides (symmetrized internally).

    Returns
    -------
    P : (D, n, n) ndarray
        Symmetric solution family.

    Raises
    ------
    SingularOperator
        If the stacked operator's smallest singular value falls below
        1e-12 times its largest.
    """
    A, gen = _coerce(A, gen)
    D, n = A.shape[0], A.shape[1]
    W = np.asarray(W, dtype=np.float64)
    if W.ndim == 2:
        W = W[None]
    if W.shape != (D, n, n):
        raise ValueError(f"W must have shape ({D}, {n}, {n}), got {W.shape}")
    W = (W + np.swapaxes(W, -1, -2)) / 2.0

    op = coupled_lyapunov_operator(A, gen)
    sv = np.linalg.svd(op, compute_uv=False)
    if sv[-1] < SINGULARITY_RTOL * sv[0]:
        raise SingularOperator(
            f"coupled Lyapunov operator is singular "
            f"(smallest singular value {sv[-1]:.3e}, largest {sv[0]:.3e})"
        )
    rhs = -svec(W).reshape(-1)
    P = smat(np.linalg.solve(op, rhs).reshape(D, -1), n)

    w_norm = float(np.linalg.norm(W))
    coupling = np.einsum("ij,jkl->ikl", gen.pi, P)
    res = P @ A + np.swapaxes(A, -1, -2) @ P + coupling + W
    worst = max(float(np.linalg.norm(res[i])) for i in range(D))
    if worst > RESIDUAL_RTOL * (1.0 + w_norm):
        logger.warning(
            "coupled Lyapunov residual %.3e exceeds %.1e*(1+||W||_F)",
            worst,
            RESIDUAL_RTOL,
        )
    return P


def coupled_spectral_abscissa(A, gen) -> float:
    """Largest real part of the second-moment propagation operator.

    The operator acts on stacked n x n blocks with diagonal blocks
    A(i) (+) A(i) (Kronecker sum) and coupling pi_ji * I between block i
    and block j.  A negative value certifies that the coupled Lyapunov
    solve with W = I produces a positive definite family, and conversely.
    """
    A, gen = _coerce(A, gen)
    D, n = A.shape[0], A.shape[1]
    eye = np.eye(n)
    blocks = np.zeros((D, D, n * n, n * n))
    for i in range(D):
        ksum = np.kron(A[i], eye) + np.kron(eye, A[i])
        blocks[i, i] = ksum + gen.pi[i, i] * np.eye(n * n)
        for j in range(D):
            if j != i:
                blocks[i, j] = gen.pi[j, i] * np.eye(n * n)
    L = blocks.swapaxes(1, 2).reshape(D * n * n, D * n * n)
    return float(np.max(np.linalg.eigvals(L).real))


def is_positive_definite(M, tol: float) -> bool:
    """True iff every symmetrized eigenvalue exceeds tol.

    Accepts one matrix or a stacked family; the leading axes broadcast.
    """
    M = np.asarray(M, dtype=np.float64)
    M = (M + np.swapaxes(M, -1, -2)) / 2.0
    return bool(np.min(np.linalg.eigvalsh(M)) > tol)


def closed_loop(A, B, Theta) -> np.ndarray:
    """Regime family A(i) + B(i) Theta(i)."""
    return np.asarray(A) + np.asarray(B) @ np.asarray(Theta)
