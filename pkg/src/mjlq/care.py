"""Single-player coupled Riccati solver, closed loop, and value function.

The optimality system couples one algebraic Riccati equation per regime
through the generator:

    E_i(P) = M(P,i) - L(P,i) R(i)^-1 L(P,i)^T = 0,

    M(P,i) = P(i)A(i) + A(i)^T P(i) + Q(i) + sum_j pi_ij P(j),
    L(P,i) = P(i)B(i) + S(i)^T.

It is solved by Newton-Kleinman iteration: each sweep solves one coupled
Lyapunov equality for the current closed loop and refreshes the gain
Theta(i) = -R(i)^-1 L(P,i)^T.  Near the stabilizing solution convergence
is quadratic; the max Frobenius residual across regimes is the stopping
criterion and is recorded per sweep.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    LyapunovSingular,
    NotConverged,
    ResolventSingular,
    SingularOperator,
)
from .linalg import closed_loop, coupled_lyapunov_solve
from .model import MjlsLqProblem
from .stability import StabilityCertificate, check_condition_a, is_stabilizer, synthesize_stabilizer

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100
PSD_TOL = 1e-8


@dataclass(frozen=True)
class ClosedLoopPolicy:
    """Feedback law u(t) = Theta(regime) X(t) + exp(-kappa*t) nu_bar(regime).

    nu_bar and kappa are None for the homogeneous (pure-feedback) policy.
    """

    Theta: np.ndarray
    nu_bar: np.ndarray | None = None
    kappa: float | None = None


@dataclass(frozen=True)
class CareSolution:
    """Converged Riccati solution with diagnostics.

    residual_history holds the max Frobenius residual after each Newton
    sweep (monotone after the first sweep on well-posed problems).
    """

    P: np.ndarray
    Theta: np.ndarray
    residuals: np.ndarray
    residual_norms: np.ndarray
    iterations: int
    certificate: StabilityCertificate
    residual_history: tuple = ()


def care_operator(P, problem: MjlsLqProblem) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate M(P, i) and L(P, i) for a symmetric family P.

    Returns
    -------
    M : (D, n, n) ndarray
    L : (D, n, m) ndarray
    """
    P = np.asarray(P, dtype=np.float64)
    if P.ndim == 2:
        P = P[None]
    if P.shape != problem.A.shape:
        raise ValueError(f"P must have shape {problem.A.shape}, got {P.shape}")
    A, B, Q, S = problem.A, problem.B, problem.Q, problem.S
    M = P @ A + np.swapaxes(A, -1, -2) @ P + Q
    M += np.einsum("ij,jkl->ikl", problem.gen.pi, P)
    L = P @ B + np.swapaxes(S, -1, -2)
    return M, L


def gain_from(P, problem: MjlsLqProblem) -> np.ndarray:
    """Optimal gain Theta(i) = -R(i)^-1 L(P,i)^T for a given P family."""
    _, L = care_operator(P, problem)
    return -np.linalg.solve(problem.R, np.swapaxes(L, -1, -2))


def care_residual(P, problem: MjlsLqProblem) -> np.ndarray:
    """Residual family E_i(P) = M(P,i) - L(P,i) R(i)^-1 L(P,i)^T."""
    M, L = care_operator(P, problem)
    Lt = np.swapaxes(L, -1, -2)
    return M - L @ np.linalg.solve(problem.R, Lt)


def residual_norms(P, problem: MjlsLqProblem) -> np.ndarray:
    """Frobenius norms of the per-regime Riccati residuals."""
    E = care_residual(P, problem)
    return np.linalg.norm(E, axis=(1, 2))


def solve_care(
    problem: MjlsLqProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    theta0: np.ndarray | None = None,
) -> CareSolution:
    """Solve the coupled Riccati system by Newton-Kleinman iteration.

    Parameters
    ----------
    problem : MjlsLqProblem
        Validated problem data.
    tol : float
        Stop when max_i ||E_i(P)||_F <= tol.
    max_iter : int
        Sweep budget.
    theta0 : (D, m, n) array_like, optional
        Starting gain.  Defaults to zero when the open loop passes the
        stability test, else to a synthesized stabilizer.

    Raises
    ------
    NotConverged
        Budget exhausted; carries the best residual seen.
    LyapunovSingular
        A sweep's coupled Lyapunov solve was singular (bad warm start or
        loss of stabilization along the way).
    SynthesisFailed
        No starting stabilizer could be built.
    """
    D, n, m = problem.D, problem.n, problem.m
    if theta0 is None:
        if check_condition_a(problem.A, problem.gen).feasible:
            Theta = np.zeros((D, m, n))
        else:
            Theta = synthesize_stabilizer(problem)
    else:
        Theta = np.asarray(theta0, dtype=np.float64)
        if Theta.ndim == 2:
            Theta = Theta[None]
        if Theta.shape != (D, m, n):
            raise ValueError(
                f"theta0 must have shape {(D, m, n)}, got {Theta.shape}"
            )
    A, B, Q, S, R = problem.A, problem.B, problem.Q, problem.S, problem.R
    St = np.swapaxes(S, -1, -2)
    history: list[float] = []
    best = np.inf
    P = None
    for sweep in range(1, max_iter + 1):
        Acl = closed_loop(A, B, Theta)
        Tt = np.swapaxes(Theta, -1, -2)
        Qcl = Q + St @ Theta + Tt @ S + Tt @ (R @ Theta)
        try:
            P = coupled_lyapunov_solve(Acl, problem.gen, Qcl)
        except SingularOperator as exc:
            raise LyapunovSingular(sweep) from exc
        Theta = gain_from(P, problem)
        norms = residual_norms(P, problem)
        res = float(np.max(norms))
        history.append(res)
        best = min(best, res)
        logger.debug("newton sweep %d: max residual %.3e", sweep, res)
        if res <= tol:
            E = care_residual(P, problem)
            return CareSolution(
                P=P,
                Theta=Theta,
                residuals=E,
                residual_norms=norms,
                iterations=sweep,
                certificate=is_stabilizer(Theta, problem),
                residual_history=tuple(history),
            )
    raise NotConverged(max_iter, best, what="coupled Riccati solver")


def membership_in_G(P, problem: MjlsLqProblem, tol: float = PSD_TOL) -> bool:
    """Test whether [[M(P,i), L(P,i)], [L(P,i)^T, R(i)]] >= 0 per regime."""
    M, L = care_operator(P, problem)
    for i in range(problem.D):
        block = np.block([[M[i], L[i]], [L[i].T, problem.R[i]]])
        w = np.linalg.eigvalsh((block + block.T) / 2.0)
        if w[0] < -tol:
            return False
    return True


def assemble_closed_loop(
    sol: CareSolution,
    problem: MjlsLqProblem,
    eta=None,
) -> ClosedLoopPolicy:
    """Build the optimal feedback law from a solved Riccati system.

    Without eta the policy is pure feedback u = Theta(regime) X.  With a
    drift-correction solution eta (amplitudes h, rate kappa) the
    feedforward amplitude is nu_bar(i) = -R(i)^-1 [B(i)^T h(i) +
    rho_bar(i)], applied as u += exp(-kappa*t) nu_bar(regime).
    """
    if eta is None:
        return ClosedLoopPolicy(Theta=sol.Theta)
    rho = (
        problem.inhomog.rho
        if problem.inhomog is not None
        else np.zeros((problem.D, problem.m))
    )
    r_tilde = np.einsum("ikm,ik->im", problem.B, eta.h) + rho
    nu_bar = -np.linalg.solve(problem.R, r_tilde[..., None])[..., 0]
    return ClosedLoopPolicy(Theta=sol.Theta, nu_bar=nu_bar, kappa=eta.kappa)


def value_function(
    sol: CareSolution,
    problem: MjlsLqProblem,
    x,
    i: int,
    eta=None,
) -> float:
    """Optimal cost from state x in regime i.

    Homogeneous problems: <P(i)x, x>.  With a decaying inhomogeneity and
    its drift-correction solution eta, two terms are added: 2<h(i), x>
    and the exact conditional integral of the decaying running term,
    [(2*kappa*I - Pi)^-1 g](i) with g(j) = 2<h(j), b_bar(j)> -
    <R(j)^-1 r_tilde(j), r_tilde(j)>, r_tilde(j) = B(j)^T h(j) +
    rho_bar(j).
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != problem.n:
        raise ValueError(f"x must have length {problem.n}, got {x.shape[0]}")
    if not 0 <= i < problem.D:
        raise ValueError(f"regime index {i} out of range for D={problem.D}")
    base = float(x @ sol.P[i] @ x)
    if eta is None:
        return base
    sig = problem.inhomog
    rho = sig.rho if sig is not None else np.zeros((problem.D, problem.m))
    b_bar = sig.b if sig is not None else np.zeros((problem.D, problem.n))
    r_tilde = np.einsum("jkm,jk->jm", problem.B, eta.h) + rho
    g = 2.0 * np.einsum("jk,jk->j", eta.h, b_bar)
    g -= np.einsum(
        "jm,jm->j", np.linalg.solve(problem.R, r_tilde[..., None])[..., 0], r_tilde
    )
    shifted = 2.0 * eta.kappa * np.eye(problem.D) - problem.gen.pi
    sv = np.linalg.svd(shifted, compute_uv=False)
    if sv[-1] < 1e-12 * sv[0]:
        raise ResolventSingular(
            f"2*kappa = {2 * eta.kappa:g} is an eigenvalue of the generator"
        )
    tail = np.linalg.solve(shifted, g)
    return base + 2.0 * float(eta.h[i] @ x) + float(tail[i])
