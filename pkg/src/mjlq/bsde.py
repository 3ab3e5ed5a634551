"""Linear drift-correction equations on the infinite horizon.

The feedforward part of an inhomogeneous problem solves a linear backward
equation driven by the regime chain.  Within the decaying signal class
(forcing exp(-kappa*t) c(regime)) the ansatz eta(t) = exp(-kappa*t)
h(alpha_t) reduces that backward equation to one coupled linear system

    (F(i) - kappa I) h(i) + sum_j pi_ij h(j) + c(i) = 0,

solved here exactly; the jump-compensation integrand is then the implicit
family z_j(t) = exp(-kappa*t) [h(j) - h(alpha_t-)].  A finite-horizon
truncation with zero terminal value is also provided (backward RK4 on a
uniform grid) and must agree with the stationary solution at t = 0 as the
horizon grows; that agreement is the main oracle for both solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularShiftedOperator
from .model import MjlsLqProblem, validate_generator

RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class EtaSolution:
    """Stationary drift-correction amplitudes: eta(t) = exp(-kappa*t) h(alpha_t)."""

    h: np.ndarray
    kappa: float
    residual: float


def _coerce_drift(F, gen, c):
    gen = validate_generator(gen)
    F = np.asarray(F, dtype=np.float64)
    if F.ndim == 2:
        F = F[None]
    if F.ndim != 3 or F.shape[0] != gen.D or F.shape[1] != F.shape[2]:
        raise ValueError(f"F must have shape ({gen.D}, n, n), got {F.shape}")
    n = F.shape[1]
    c = np.asarray(c, dtype=np.float64)
    if c.ndim == 1:
        c = c[None]
    if c.shape != (gen.D, n):
        raise ValueError(f"c must have shape ({gen.D}, {n}), got {c.shape}")
    return F, gen, c


def solve_linear_bsde_stationary(F, gen, c, kappa: float) -> EtaSolution:
    """Solve (F(i) - kappa I) h(i) + sum_j pi_ij h(j) + c(i) = 0.

    Parameters
    ----------
    F : (D, n, n) array_like
        Per-regime drift-transpose matrices.
    gen : Generator or (D, D) array_like
    c : (D, n) array_like
        Per-regime forcing amplitudes.
    kappa : float
        Decay rate of the forcing, > 0.

    Raises
    ------
    SingularShiftedOperator
        The shifted stacked operator is numerically singular (cannot
        happen when the F family satisfies the stability test and
        kappa > 0).
    """
    F, gen, c = _coerce_drift(F, gen, c)
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa:g}")
    D, n = F.shape[0], F.shape[1]
    op = np.zeros((D * n, D * n))
    for i in range(D):
        op[i * n : (i + 1) * n, i * n : (i + 1) * n] = (
            F[i] - kappa * np.eye(n) + gen.pi[i, i] * np.eye(n)
        )
        for j in range(D):
            if j != i:
                op[i * n : (i + 1) * n, j * n : (j + 1) * n] = gen.pi[i, j] * np.eye(n)
    sv = np.linalg.svd(op, compute_uv=False)
    if sv[-1] < 1e-12 * sv[0]:
        raise SingularShiftedOperator(
            f"shifted drift-matching operator is singular "
            f"(smallest singular value {sv[-1]:.3e})"
        )
    h = np.linalg.solve(op, -c.reshape(-1)).reshape(D, n)
    res = np.einsum("ikl,il->ik", F, h) - kappa * h
    res += np.einsum("ij,jk->ik", gen.pi, h) + c
    residual = float(np.max(np.linalg.norm(res, axis=1)))
    return EtaSolution(h=h, kappa=float(kappa), residual=residual)


def jump_compensation_amplitudes(eta: EtaSolution) -> np.ndarray:
    """Amplitudes z[i, j] = h(j) - h(i) of the jump-compensation integrand.

    The time-t integrand toward target regime j from current regime i is
    exp(-kappa*t) * z[i, j].
    """
    return eta.h[None, :, :] - eta.h[:, None, :]


def default_truncation_steps(F, T: float) -> int:
    """Step count keeping h * max ||F(i)|| at or below 0.1 (min 10)."""
    F = np.asarray(F, dtype=np.float64)
    if F.ndim == 2:
        F = F[None]
    scale = max(float(np.linalg.norm(F[i], 2)) for i in range(F.shape[0]))
    return max(10, int(np.ceil(T * max(scale, 1.0) / 0.1)))


def solve_linear_bsde_truncated(F, gen, phi, T: float, steps: int | None = None):
    """Integrate the truncated backward system with zero terminal value.

    Solves y'(t, i) = -F(i) y(t, i) - sum_j pi_ij y(t, j) - phi(t, i)
    backward from y(T, .) = 0 with classical RK4 on a uniform grid.

    Parameters
    ----------
    phi : callable or (steps+1, D, n) array_like
        Forcing; a callable receives t and returns the (D, n) amplitude
        stack (full RK4 order), an array gives grid values (midpoints are
        interpolated linearly, which is second-order accurate).
    T : float
        Truncation horizon, > 0.
    steps : int, optional
        Grid intervals (>= 10); default keeps step * max ||F|| <= 0.1.

    Returns
    -------
    y : (steps+1, D, n) ndarray
        Grid values, y[0] being the time-0 solution.
    """
    gen = validate_generator(gen)
    F = np.asarray(F, dtype=np.float64)
    if F.ndim == 2:
        F = F[None]
    D, n = F.shape[0], F.shape[1]
    if not T > 0:
        raise ValueError(f"T must be positive, got {T:g}")
    if steps is None:
        steps = default_truncation_steps(F, T)
    if steps < 10:
        raise ValueError(f"steps must be at least 10, got {steps}")
    dt = T / steps

    if callable(phi):
        phi_at = phi
    else:
        grid_phi = np.asarray(phi, dtype=np.float64)
        if grid_phi.shape != (steps + 1, D, n):
            raise ValueError(
                f"phi grid must have shape {(steps + 1, D, n)}, got {grid_phi.shape}"
            )

        def phi_at(t: float) -> np.ndarray:
            s = min(max(t / dt, 0.0), float(steps))
            k = min(int(s), steps - 1)
            frac = s - k
            return (1.0 - frac) * grid_phi[k] + frac * grid_phi[k + 1]

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        out = -np.einsum("ikl,il->ik", F, y)
        out -= np.einsum("ij,jk->ik", gen.pi, y)
        out -= np.asarray(phi_at(t), dtype=np.float64)
        return out

    y = np.zeros((steps + 1, D, n))
    for k in range(steps, 0, -1):
        t = k * dt
        cur = y[k]
        k1 = rhs(t, cur)
        k2 = rhs(t - dt / 2, cur - (dt / 2) * k1)
        k3 = rhs(t - dt / 2, cur - (dt / 2) * k2)
        k4 = rhs(t - dt, cur - dt * k3)
        y[k - 1] = cur - (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def build_eta_system_lq(sol, problem: MjlsLqProblem, sig=None):
    """Assemble (F, c) of the drift-correction system for a solved problem.

    F(i) = A(i)^T - L(P,i) R(i)^-1 B(i)^T and c(i) = P(i) b_bar(i) -
    L(P,i) R(i)^-1 rho_bar(i) + q_bar(i), where L(P,i) = P(i)B(i) + S(i)^T.
    sig defaults to the problem's own inhomogeneity.
    """
    if sig is None:
        sig = problem.inhomog
    if sig is None:
        raise ValueError("problem has no inhomogeneous signal")
    # Accept a solved-problem object or the bare value family.
    P = np.asarray(getattr(sol, "P", sol), dtype=np.float64)
    A, B, S, R = problem.A, problem.B, problem.S, problem.R
    L = P @ B + np.swapaxes(S, -1, -2)
    # K(i) = L(P,i) R(i)^-1, with R symmetric
    K = np.swapaxes(np.linalg.solve(R, np.swapaxes(L, -1, -2)), -1, -2)
    F = np.swapaxes(A, -1, -2) - K @ np.swapaxes(B, -1, -2)
    c = np.einsum("ikl,il->ik", P, sig.b)
    c -= np.einsum("ikm,im->ik", K, sig.rho)
    c += sig.q
    return F, c


def solve_lq_feedforward(sol, problem: MjlsLqProblem, sig=None) -> EtaSolution:
    """Solve the drift-correction system for a solved single-player problem."""
    if sig is None:
        sig = problem.inhomog
    F, c = build_eta_system_lq(sol, problem, sig)
    return solve_linear_bsde_stationary(F, problem.gen, c, sig.kappa)
