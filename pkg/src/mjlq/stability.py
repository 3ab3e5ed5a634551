"""Mean-square stability tests and stabilizing-gain synthesis.

A regime family A is mean-square stabilizing when the strict coupled
Lyapunov inequality admits a positive definite witness.  Feasibility is
decided constructively: solve the equality with right-hand side W = I and
test the solution for positive definiteness.  The witness then satisfies
the strict inequality with margin 1 by construction, and the sign of the
coupled spectral abscissa gives an independent cross-check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import SingularOperator, SynthesisFailed
from .linalg import (
    closed_loop,
    coupled_lyapunov_solve,
    coupled_spectral_abscissa,
)
from .model import Generator, MjlsGameProblem, MjlsLqProblem, validate_generator

logger = logging.getLogger(__name__)

PD_TOL = 1e-10
MAX_SWEEPS = 500
FLOW_TOL = 1e-9


@dataclass(frozen=True)
class StabilityCertificate:
    """Outcome of a mean-square stability test.

    When feasible, P is a positive definite family satisfying the strict
    coupled Lyapunov inequality and margin is the smallest eigenvalue of
    its negated left-hand side across regimes (1 up to roundoff for the
    W = I construction).  abscissa is always reported.
    """

    feasible: bool
    P: np.ndarray | None
    abscissa: float
    margin: float


def check_condition_a(A, gen) -> StabilityCertificate:
    """Decide coupled-Lyapunov feasibility for a drift family.

    Solves the equality with W(i) = I and certifies feasibility iff every
    solution block is positive definite.  Infeasibility is a value, never
    an error; a singular coupled operator also reports infeasible (with
    margin NaN, since no witness exists).
    """
    gen = validate_generator(gen)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 2:
        A = A[None]
    D, n = A.shape[0], A.shape[1]
    abscissa = coupled_spectral_abscissa(A, gen)
    W = np.broadcast_to(np.eye(n), (D, n, n)).copy()
    try:
        P = coupled_lyapunov_solve(A, gen, W)
    except SingularOperator:
        return StabilityCertificate(
            feasible=False, P=None, abscissa=abscissa, margin=float("nan")
        )
    lhs = P @ A + np.swapaxes(A, -1, -2) @ P
    lhs += np.einsum("ij,jkl->ikl", gen.pi, P)
    margin = min(float(np.linalg.eigvalsh(-(lhs[i] + lhs[i].T) / 2)[0]) for i in range(D))
    feasible = all(np.linalg.eigvalsh(P[i])[0] > PD_TOL for i in range(D))
    return StabilityCertificate(
        feasible=feasible,
        P=P if feasible else None,
        abscissa=abscissa,
        margin=margin,
    )


def is_stabilizer(Theta, problem: MjlsLqProblem) -> StabilityCertificate:
    """Certificate for the closed-loop family A(i) + B(i) Theta(i)."""
    Theta = np.asarray(Theta, dtype=np.float64)
    if Theta.ndim == 2:
        Theta = Theta[None]
    return check_condition_a(closed_loop(problem.A, problem.B, Theta), problem.gen)


def is_game_stabilizer(Theta1, Theta2, problem: MjlsGameProblem) -> StabilityCertificate:
    """Certificate for A(i) + B1(i) Theta1(i) + B2(i) Theta2(i)."""
    Theta1 = np.asarray(Theta1, dtype=np.float64)
    Theta2 = np.asarray(Theta2, dtype=np.float64)
    if Theta1.ndim == 2:
        Theta1 = Theta1[None]
    if Theta2.ndim == 2:
        Theta2 = Theta2[None]
    Acl = problem.A + problem.B1 @ Theta1 + problem.B2 @ Theta2
    return check_condition_a(Acl, problem.gen)


def _riccati_flow_rhs(P, A, At, B, Bt, pi):
    """d/ds of the auxiliary-cost (Q=I, S=0, R=I) Riccati flow."""
    D, n = A.shape[0], A.shape[1]
    M = P @ A + At @ P + np.einsum("ij,jkl->ikl", pi, P)
    M += np.broadcast_to(np.eye(n), (D, n, n))
    PB = P @ B
    return M - PB @ np.swapaxes(PB, -1, -2)


def synthesize_stabilizer(
    problem: MjlsLqProblem,
    max_sweeps: int = MAX_SWEEPS,
    flow_tol: float = FLOW_TOL,
) -> np.ndarray:
    """Produce a certified stabilizing gain family Theta0.

    Returns zero gains when the open loop already passes
    check_condition_a.  Otherwise integrates the matrix Riccati flow
    dP/ds = P A + A^T P + I + sum_j pi_ij P(j) - P B B^T P from P = I
    (auxiliary unit weights) with RK4 steps sized from a local Lipschitz
    bound, checking the gain Theta = -B^T P for a stabilization
    certificate every sweep; stops once the flow has converged and the
    gain is certified.  Raises SynthesisFailed on divergence or sweep
    exhaustion, e.g. for unstabilizable dynamics.
    """
    A, B, gen = problem.A, problem.B, problem.gen
    D, n, m = problem.D, problem.n, problem.m
    if check_condition_a(A, gen).feasible:
        return np.zeros((D, m, n))
    At = np.swapaxes(A, -1, -2)
    Bt = np.swapaxes(B, -1, -2)
    P = np.broadcast_to(np.eye(n), (D, n, n)).copy()
    pi_scale = float(np.max(np.sum(np.abs(gen.pi), axis=1)))
    a_scale = max(np.linalg.norm(A[i], 2) for i in range(D))
    for sweep in range(1, max_sweeps + 1):
        lip = (
            2.0 * a_scale
            + 2.0 * max(
                np.linalg.norm(P[i], 2) * np.linalg.norm(B[i], 2) ** 2
                for i in range(D)
            )
            + pi_scale
        )
        h = 0.2 / max(lip, 1e-6)
        k1 = _riccati_flow_rhs(P, A, At, B, Bt, gen.pi)
        k2 = _riccati_flow_rhs(P + 0.5 * h * k1, A, At, B, Bt, gen.pi)
        k3 = _riccati_flow_rhs(P + 0.5 * h * k2, A, At, B, Bt, gen.pi)
        k4 = _riccati_flow_rhs(P + h * k3, A, At, B, Bt, gen.pi)
        P = P + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        P = (P + np.swapaxes(P, -1, -2)) / 2.0
        if not np.all(np.isfinite(P)):
            raise SynthesisFailed(
                f"stabilizer flow diverged at sweep {sweep}; "
                "system may not be stabilizable"
            )
        residual = float(
            max(
                np.linalg.norm(r)
                for r in _riccati_flow_rhs(P, A, At, B, Bt, gen.pi)
            )
        )
        if residual <= flow_tol * (1.0 + float(np.linalg.norm(P))):
            Theta = -(Bt @ P)
            if is_stabilizer(Theta, problem).feasible:
                logger.debug("stabilizer synthesized in %d sweeps", sweep)
                return Theta
    raise SynthesisFailed(
        f"no certified stabilizer after {max_sweeps} sweeps "
        f"(flow residual {residual:.3e})"
    )


def synthesize_joint_stabilizer(problem: MjlsGameProblem) -> tuple[np.ndarray, np.ndarray]:
    """Stabilizing gain pair via synthesis on the stacked control matrix."""
    if check_condition_a(problem.A, problem.gen).feasible:
        return (
            np.zeros((problem.D, problem.m1, problem.n)),
            np.zeros((problem.D, problem.m2, problem.n)),
        )
    stacked = MjlsLqProblem(
        gen=problem.gen,
        A=problem.A,
        B=np.concatenate([problem.B1, problem.B2], axis=2),
        Q=np.broadcast_to(np.eye(problem.n), problem.A.shape).copy(),
        S=np.zeros((problem.D, problem.m1 + problem.m2, problem.n)),
        R=np.broadcast_to(
            np.eye(problem.m1 + problem.m2),
            (problem.D, problem.m1 + problem.m2, problem.m1 + problem.m2),
        ).copy(),
    )
    Theta = synthesize_stabilizer(stacked)
    return Theta[:, : problem.m1, :], Theta[:, problem.m1 :, :]
