"""Two-player nonzero-sum closed-loop Nash equilibrium solver.

The equilibrium is characterized by two regime-coupled Riccati equations,
cross-linked through the opponent's gain, plus a per-regime linear
constraint tying both gains to both solution families:

    R11_1(i) Theta1(i) + R12_1(i) Theta2(i) + L11(P1,i)^T = 0,
    R21_2(i) Theta1(i) + R22_2(i) Theta2(i) + L22(P2,i)^T = 0,

with L_k^l(P_l, i) = P_l(i) B_k(i) + S{k}_{l}(i)^T.  No algorithm is
implied by the characterization; here a Gauss-Seidel best-response
iteration is used.  Holding the opponent's gain fixed reduces each
player's problem to a single-player LQ problem (substitute the opponent's
feedback into dynamics and cost), which the tested Newton solver handles;
the gain pair is then refreshed from the joint constraint solve.
Convergence is declared on the residuals of the characterizing equations
themselves, never on iterate drift.

For inhomogeneous problems (decaying signals) the feedforward amplitudes
solve one dense linear system stacking both players' drift-matching rows
with both feedforward constraints; see solve_game_feedforward.  The
equation for player 1's drift is implemented in two published-form
variants whose difference is reported as a diagnostic, never silently
reconciled (they coincide whenever the cross weight R21_1 vanishes or the
control-cost signals are zero).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .care import solve_care
from .errors import (
    InnerCareFailed,
    NotConverged,
    SingularConstraintBlock,
    SingularFeedforwardSystem,
    SolverError,
)
from .model import GameDecayingSignals, MjlsGameProblem, MjlsLqProblem
from .stability import (
    StabilityCertificate,
    check_condition_a,
    is_game_stabilizer,
    synthesize_joint_stabilizer,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100
MIN_RELAXATION = 1.0 / 16.0


@dataclass(frozen=True)
class GameSolution:
    """Converged equilibrium: value families, gains, and diagnostics."""

    P1: np.ndarray
    P2: np.ndarray
    Theta1: np.ndarray
    Theta2: np.ndarray
    residuals_1: np.ndarray
    residuals_2: np.ndarray
    residual_norms_1: np.ndarray
    residual_norms_2: np.ndarray
    constraint_residual: float
    iterations: int
    certificate: StabilityCertificate
    residual_history: tuple = ()


@dataclass(frozen=True)
class GameEtaSolution:
    """Feedforward amplitudes for both players (common decay rate kappa).

    drift_gap reports the max-norm difference between the two published
    drift variants for player 1 evaluated at this solution (zero when the
    variants coincide).
    """

    h1: np.ndarray
    h2: np.ndarray
    nu1: np.ndarray
    nu2: np.ndarray
    kappa: float
    residual: float
    constraint_residual: float
    drift_gap: float
    drift_form: str = "printed"


@dataclass(frozen=True)
class GamePolicy:
    """Closed-loop pair u_k = Theta_k(regime) X + exp(-kappa*t) nu_k(regime)."""

    Theta1: np.ndarray
    Theta2: np.ndarray
    nu1_bar: np.ndarray | None = None
    nu2_bar: np.ndarray | None = None
    kappa: float | None = None


def game_operator(P1, P2, problem: MjlsGameProblem) -> dict:
    """Evaluate both M families and all four L families.

    Keys: "M1", "M2" (n x n per regime) and "L11", "L21", "L12", "L22"
    where L{k}{l} couples control k with player l's family, shape
    n x m_k per regime.
    """
    P1 = np.asarray(P1, dtype=np.float64)
    P2 = np.asarray(P2, dtype=np.float64)
    if P1.ndim == 2:
        P1 = P1[None]
    if P2.ndim == 2:
        P2 = P2[None]
    if P1.shape != problem.A.shape or P2.shape != problem.A.shape:
        raise ValueError(
            f"P families must have shape {problem.A.shape}, "
            f"got {P1.shape} and {P2.shape}"
        )
    A, pi = problem.A, problem.gen.pi
    At = np.swapaxes(A, -1, -2)
    M1 = P1 @ A + At @ P1 + problem.Q1 + np.einsum("ij,jkl->ikl", pi, P1)
    M2 = P2 @ A + At @ P2 + problem.Q2 + np.einsum("ij,jkl->ikl", pi, P2)
    return {
        "M1": M1,
        "M2": M2,
        "L11": P1 @ problem.B1 + np.swapaxes(problem.S1_1, -1, -2),
        "L21": P1 @ problem.B2 + np.swapaxes(problem.S2_1, -1, -2),
        "L12": P2 @ problem.B1 + np.swapaxes(problem.S1_2, -1, -2),
        "L22": P2 @ problem.B2 + np.swapaxes(problem.S2_2, -1, -2),
    }


def solve_gain_constraint(P1, P2, problem: MjlsGameProblem):
    """Solve the stacked per-regime gain constraint for (Theta1, Theta2)."""
    ops = game_operator(P1, P2, problem)
    D, n, m1, m2 = problem.D, problem.n, problem.m1, problem.m2
    Theta1 = np.empty((D, m1, n))
    Theta2 = np.empty((D, m2, n))
    for i in range(D):
        block = np.block(
            [
                [problem.R11_1[i], problem.R12_1[i]],
                [problem.R21_2[i], problem.R22_2[i]],
            ]
        )
        sv = np.linalg.svd(block, compute_uv=False)
        if sv[-1] < 1e-12 * sv[0]:
            raise SingularConstraintBlock(i, float(sv[-1]))
        rhs = -np.vstack([ops["L11"][i].T, ops["L22"][i].T])
        gains = np.linalg.solve(block, rhs)
        Theta1[i] = gains[:m1]
        Theta2[i] = gains[m1:]
    return Theta1, Theta2


def constraint_residual(Theta1, Theta2, P1, P2, problem: MjlsGameProblem) -> float:
    """Max Frobenius norm over regimes and constraint rows at the gains."""
    ops = game_operator(P1, P2, problem)
    r1 = (
        problem.R11_1 @ Theta1
        + problem.R12_1 @ Theta2
        + np.swapaxes(ops["L11"], -1, -2)
    )
    r2 = (
        problem.R21_2 @ Theta1
        + problem.R22_2 @ Theta2
        + np.swapaxes(ops["L22"], -1, -2)
    )
    return float(
        max(np.max(np.linalg.norm(r1, axis=(1, 2))), np.max(np.linalg.norm(r2, axis=(1, 2))))
    )


def game_residuals(P1, P2, Theta1, Theta2, problem: MjlsGameProblem):
    """Evaluate both equilibrium Riccati right-hand sides verbatim.

    Returns the residual families (E1, E2); norms are reported as
    Frobenius by the solver.
    """
    ops = game_operator(P1, P2, problem)
    Theta1 = np.asarray(Theta1, dtype=np.float64)
    Theta2 = np.asarray(Theta2, dtype=np.float64)
    if Theta1.ndim == 2:
        Theta1 = Theta1[None]
    if Theta2.ndim == 2:
        Theta2 = Theta2[None]

    def solve_r(R, X):
        return np.linalg.solve(R, X)

    # Player 1: inverses of R11_1 only.
    L11, L21 = ops["L11"], ops["L21"]
    inv_L11t = solve_r(problem.R11_1, np.swapaxes(L11, -1, -2))
    inv_R12_1 = solve_r(problem.R11_1, problem.R12_1)
    mid1 = L21 - L11 @ inv_R12_1
    quad1 = problem.R22_1 - problem.R21_1 @ inv_R12_1
    T2t = np.swapaxes(Theta2, -1, -2)
    E1 = (
        ops["M1"]
        - L11 @ inv_L11t
        + mid1 @ Theta2
        + T2t @ np.swapaxes(mid1, -1, -2)
        + T2t @ quad1 @ Theta2
    )

    # Player 2: inverses of R22_2 only.
    L22, L12 = ops["L22"], ops["L12"]
    inv_L22t = solve_r(problem.R22_2, np.swapaxes(L22, -1, -2))
    inv_R21_2 = solve_r(problem.R22_2, problem.R21_2)
    mid2 = L12 - L22 @ inv_R21_2
    quad2 = problem.R11_2 - problem.R12_2 @ inv_R21_2
    T1t = np.swapaxes(Theta1, -1, -2)
    E2 = (
        ops["M2"]
        - L22 @ inv_L22t
        + mid2 @ Theta1
        + T1t @ np.swapaxes(mid2, -1, -2)
        + T1t @ quad2 @ Theta1
    )
    return E1, E2


def effective_lq_problem(
    problem: MjlsGameProblem, player: int, theta_other: np.ndarray
) -> MjlsLqProblem:
    """Single-player problem seen by one player at a fixed opponent gain.

    Substituting the opponent's feedback u_l = theta_other X into the
    dynamics and into player k's cost yields drift A + B_l theta_other,
    control matrix B_k, and completed weights; the resulting problem's
    Riccati equation is algebraically identical to player k's equilibrium
    equation at that opponent gain.
    """
    T = np.asarray(theta_other, dtype=np.float64)
    if T.ndim == 2:
        T = T[None]
    Tt = np.swapaxes(T, -1, -2)
    if player == 1:
        A_eff = problem.A + problem.B2 @ T
        Q_eff = (
            problem.Q1
            + np.swapaxes(problem.S2_1, -1, -2) @ T
            + Tt @ problem.S2_1
            + Tt @ problem.R22_1 @ T
        )
        S_eff = problem.S1_1 + problem.R12_1 @ T
        return MjlsLqProblem(
            gen=problem.gen,
            A=A_eff,
            B=problem.B1,
            Q=(Q_eff + np.swapaxes(Q_eff, -1, -2)) / 2.0,
            S=S_eff,
            R=problem.R11_1,
        )
    if player == 2:
        A_eff = problem.A + problem.B1 @ T
        Q_eff = (
            problem.Q2
            + np.swapaxes(problem.S1_2, -1, -2) @ T
            + Tt @ problem.S1_2
            + Tt @ problem.R11_2 @ T
        )
        S_eff = problem.S2_2 + problem.R21_2 @ T
        return MjlsLqProblem(
            gen=problem.gen,
            A=A_eff,
            B=problem.B2,
            Q=(Q_eff + np.swapaxes(Q_eff, -1, -2)) / 2.0,
            S=S_eff,
            R=problem.R22_2,
        )
    raise ValueError(f"player must be 1 or 2, got {player}")


def solve_game(
    problem: MjlsGameProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    relaxation: float = 1.0,
) -> GameSolution:
    """Gauss-Seidel best-response iteration for the equilibrium system.

    Each sweep solves player 1's effective single-player problem at the
    current Theta2 (warm-started Newton), then player 2's at the current
    Theta1, then refreshes both gains from the joint constraint solve,
    optionally under-relaxed (the relaxation factor is halved, down to
    1/16, when the residual oscillates).  Stops when the max of both
    equation residual norms and the constraint residual is at or below
    tol.

    Raises
    ------
    NotConverged
        Budget exhausted; carries best residuals per player.
    InnerCareFailed
        A best-response solve failed (player and sweep attached).
    SingularConstraintBlock
        The stacked constraint matrix is singular at some regime.
    """
    if not 0 < relaxation <= 1.0:
        raise ValueError(f"relaxation must be in (0, 1], got {relaxation:g}")
    D, n, m1, m2 = problem.D, problem.n, problem.m1, problem.m2
    if check_condition_a(problem.A, problem.gen).feasible:
        Theta1 = np.zeros((D, m1, n))
        Theta2 = np.zeros((D, m2, n))
    else:
        Theta1, Theta2 = synthesize_joint_stabilizer(problem)
    inner_tol = max(tol * 1e-2, 1e-13)
    omega = relaxation
    history: list[float] = []
    best = np.inf
    best_pair = (np.inf, np.inf)
    prev = np.inf
    worse_streak = 0
    for sweep in range(1, max_iter + 1):
        try:
            sol1 = solve_care(
                effective_lq_problem(problem, 1, Theta2),
                tol=inner_tol,
                theta0=Theta1,
            )
        except SolverError as exc:
            raise InnerCareFailed(1, sweep, exc) from exc
        P1 = sol1.P
        try:
            sol2 = solve_care(
                effective_lq_problem(problem, 2, Theta1),
                tol=inner_tol,
                theta0=Theta2,
            )
        except SolverError as exc:
            raise InnerCareFailed(2, sweep, exc) from exc
        P2 = sol2.P
        T1_new, T2_new = solve_gain_constraint(P1, P2, problem)
        Theta1 = (1.0 - omega) * Theta1 + omega * T1_new
        Theta2 = (1.0 - omega) * Theta2 + omega * T2_new
        E1, E2 = game_residuals(P1, P2, Theta1, Theta2, problem)
        norms1 = np.linalg.norm(E1, axis=(1, 2))
        norms2 = np.linalg.norm(E2, axis=(1, 2))
        cres = constraint_residual(Theta1, Theta2, P1, P2, problem)
        res = max(float(np.max(norms1)), float(np.max(norms2)), cres)
        history.append(res)
        if res < best:
            best = res
            best_pair = (float(np.max(norms1)), float(np.max(norms2)))
        logger.debug(
            "game sweep %d: residuals (%.3e, %.3e), constraint %.3e",
            sweep,
            float(np.max(norms1)),
            float(np.max(norms2)),
            cres,
        )
        if res <= tol:
            return GameSolution(
                P1=P1,
                P2=P2,
                Theta1=Theta1,
                Theta2=Theta2,
                residuals_1=E1,
                residuals_2=E2,
                residual_norms_1=norms1,
                residual_norms_2=norms2,
                constraint_residual=cres,
                iterations=sweep,
                certificate=is_game_stabilizer(Theta1, Theta2, problem),
                residual_history=tuple(history),
            )
        if sweep > 2 and res > prev * (1.0 + 1e-12):
            worse_streak += 1
            if worse_streak >= 2 and omega > MIN_RELAXATION:
                omega = max(omega / 2.0, MIN_RELAXATION)
                worse_streak = 0
                logger.debug("residual oscillation; relaxation lowered to %g", omega)
        else:
            worse_streak = 0
        prev = res
    raise NotConverged(
        max_iter,
        best,
        what="game best-response iteration",
        best_residuals=best_pair,
    )


def _feedforward_blocks(gsol: GameSolution, problem: MjlsGameProblem, form: str):
    """Per-regime coefficient blocks of both players' drift equations.

    Returns (coef_h1, coef_nu2, G1_sig, coef_h2, coef_nu1, G2_sig) where
    the G matrices multiply the control-cost signal amplitudes in the
    respective constant terms.
    """
    A = problem.A
    ops = game_operator(gsol.P1, gsol.P2, problem)
    T1t = np.swapaxes(gsol.Theta1, -1, -2)
    T2t = np.swapaxes(gsol.Theta2, -1, -2)
    A1_hat = A + problem.B2 @ gsol.Theta2
    A2_hat = A + problem.B1 @ gsol.Theta1

    def right_divide(X, R):
        # X @ R^-1 with R symmetric
        return np.swapaxes(np.linalg.solve(R, np.swapaxes(X, -1, -2)), -1, -2)

    G1_plus = right_divide(ops["L11"] + T2t @ problem.R21_1, problem.R11_1)
    if form == "printed":
        G1_sig = right_divide(ops["L11"] - T2t @ problem.R21_1, problem.R11_1)
        nu2_sign = -1.0
    elif form == "reduction":
        G1_sig = G1_plus
        nu2_sign = 1.0
    else:
        raise ValueError(f"drift_form must be 'printed' or 'reduction', got {form!r}")
    coef_h1 = G1_plus @ np.swapaxes(problem.B1, -1, -2) - np.swapaxes(A1_hat, -1, -2)
    coef_nu2 = (
        -(np.swapaxes(problem.S2_1, -1, -2) + T2t @ problem.R22_1)
        + nu2_sign * (G1_sig @ problem.R12_1)
        - gsol.P1 @ problem.B2
    )

    G2_plus = right_divide(ops["L22"] + T1t @ problem.R12_2, problem.R22_2)
    coef_h2 = G2_plus @ np.swapaxes(problem.B2, -1, -2) - np.swapaxes(A2_hat, -1, -2)
    coef_nu1 = (
        -(np.swapaxes(problem.S1_2, -1, -2) + T1t @ problem.R11_2)
        + (G2_plus @ problem.R21_2)
        - gsol.P2 @ problem.B1
    )
    return coef_h1, coef_nu2, G1_sig, coef_h2, coef_nu1, G2_plus


def _drift_consts(gsol, problem, sig, G1_sig, G2_plus):
    T1t = np.swapaxes(gsol.Theta1, -1, -2)
    T2t = np.swapaxes(gsol.Theta2, -1, -2)
    const1 = np.einsum("ikm,im->ik", G1_sig, sig.rho1_1)
    const1 -= np.einsum("ikl,il->ik", gsol.P1, sig.b)
    const1 -= sig.q1
    const1 -= np.einsum("ikm,im->ik", T2t, sig.rho2_1)
    const2 = np.einsum("ikm,im->ik", G2_plus, sig.rho2_2)
    const2 -= np.einsum("ikl,il->ik", gsol.P2, sig.b)
    const2 -= sig.q2
    const2 -= np.einsum("ikm,im->ik", T1t, sig.rho1_2)
    return const1, const2


def solve_game_feedforward(
    gsol: GameSolution,
    problem: MjlsGameProblem,
    sig: GameDecayingSignals | None = None,
    drift_form: str = "printed",
) -> GameEtaSolution:
    """Solve for both players' feedforward amplitudes in one dense system.

    With the ansatz eta_k(t) = exp(-kappa*t) h_k(alpha_t) and nu_k(t) =
    exp(-kappa*t) nu_bar_k(alpha_t), both drift-matching equations and
    both feedforward constraints become linear in the stacked unknowns
    (h1, h2, nu_bar1, nu_bar2) across regimes.  drift_form selects which
    published variant of player 1's drift is assembled ("printed" or
    "reduction"); the returned drift_gap diagnostic reports how far the
    two variants differ at the computed solution.

    Raises
    ------
    SingularFeedforwardSystem
        The stacked system is numerically singular.
    """
    if sig is None:
        sig = problem.inhomog
    if sig is None:
        raise ValueError("problem has no inhomogeneous signal block")
    D, n, m1, m2 = problem.D, problem.n, problem.m1, problem.m2
    kappa = sig.kappa
    coef_h1, coef_nu2, G1_sig, coef_h2, coef_nu1, G2_plus = _feedforward_blocks(
        gsol, problem, drift_form
    )
    const1, const2 = _drift_consts(gsol, problem, sig, G1_sig, G2_plus)

    width = 2 * n + m1 + m2
    off_h1, off_h2, off_n1, off_n2 = 0, n, 2 * n, 2 * n + m1
    size = D * width
    op = np.zeros((size, size))
    rhs = np.zeros(size)
    B1t = np.swapaxes(problem.B1, -1, -2)
    B2t = np.swapaxes(problem.B2, -1, -2)
    for i in range(D):
        base = i * width
        # eta_1 drift matching: (-kappa + pi_ii) h1(i) - coef_h1(i) h1(i)
        #   + sum_{j != i} pi_ij h1(j) - coef_nu2(i) nu2(i) = const1(i)
        r0 = base + off_h1
        op[r0 : r0 + n, r0 : r0 + n] = (
            (-kappa + problem.gen.pi[i, i]) * np.eye(n) - coef_h1[i]
        )
        for j in range(D):
            if j != i:
                op[r0 : r0 + n, j * width + off_h1 : j * width + off_h1 + n] = (
                    problem.gen.pi[i, j] * np.eye(n)
                )
        op[r0 : r0 + n, base + off_n2 : base + off_n2 + m2] = -coef_nu2[i]
        rhs[r0 : r0 + n] = const1[i]
        # eta_2 drift matching
        r1 = base + off_h2
        op[r1 : r1 + n, r1 : r1 + n] = (
            (-kappa + problem.gen.pi[i, i]) * np.eye(n) - coef_h2[i]
        )
        for j in range(D):
            if j != i:
                op[r1 : r1 + n, j * width + off_h2 : j * width + off_h2 + n] = (
                    problem.gen.pi[i, j] * np.eye(n)
                )
        op[r1 : r1 + n, base + off_n1 : base + off_n1 + m1] = -coef_nu1[i]
        rhs[r1 : r1 + n] = const2[i]
        # feedforward constraints
        r2 = base + off_n1
        op[r2 : r2 + m1, base + off_n1 : base + off_n1 + m1] = problem.R11_1[i]
        op[r2 : r2 + m1, base + off_n2 : base + off_n2 + m2] = problem.R12_1[i]
        op[r2 : r2 + m1, base + off_h1 : base + off_h1 + n] = B1t[i]
        rhs[r2 : r2 + m1] = -sig.rho1_1[i]
        r3 = base + off_n2
        op[r3 : r3 + m2, base + off_n1 : base + off_n1 + m1] = problem.R21_2[i]
        op[r3 : r3 + m2, base + off_n2 : base + off_n2 + m2] = problem.R22_2[i]
        op[r3 : r3 + m2, base + off_h2 : base + off_h2 + n] = B2t[i]
        rhs[r3 : r3 + m2] = -sig.rho2_2[i]

    sv = np.linalg.svd(op, compute_uv=False)
    if sv[-1] < 1e-12 * sv[0]:
        raise SingularFeedforwardSystem(
            f"stacked feedforward system is singular "
            f"(smallest singular value {sv[-1]:.3e})"
        )
    x = np.linalg.solve(op, rhs)
    blocks = x.reshape(D, width)
    h1 = blocks[:, off_h1 : off_h1 + n].copy()
    h2 = blocks[:, off_h2 : off_h2 + n].copy()
    nu1 = blocks[:, off_n1 : off_n1 + m1].copy()
    nu2 = blocks[:, off_n2 : off_n2 + m2].copy()

    residual = float(np.max(np.abs(op @ x - rhs)))
    c1 = (
        np.einsum("ikm,im->ik", problem.R11_1, nu1)
        + np.einsum("ikm,im->ik", problem.R12_1, nu2)
        + np.einsum("imk,im->ik", problem.B1, h1)
        + sig.rho1_1
    )
    c2 = (
        np.einsum("ikm,im->ik", problem.R21_2, nu1)
        + np.einsum("ikm,im->ik", problem.R22_2, nu2)
        + np.einsum("imk,im->ik", problem.B2, h2)
        + sig.rho2_2
    )
    cres = float(max(np.max(np.linalg.norm(c1, axis=1)), np.max(np.linalg.norm(c2, axis=1))))

    gap = _drift_variant_gap(gsol, problem, sig, h1, nu2)
    return GameEtaSolution(
        h1=h1,
        h2=h2,
        nu1=nu1,
        nu2=nu2,
        kappa=kappa,
        residual=residual,
        constraint_residual=cres,
        drift_gap=gap,
        drift_form=drift_form,
    )


def _drift_variant_gap(gsol, problem, sig, h1, nu2) -> float:
    """Max-norm difference of the two player-1 drift variants at (h1, nu2)."""
    T2t = np.swapaxes(gsol.Theta2, -1, -2)
    ops = game_operator(gsol.P1, gsol.P2, problem)

    def right_divide(X, R):
        return np.swapaxes(np.linalg.solve(R, np.swapaxes(X, -1, -2)), -1, -2)

    G_plus = right_divide(ops["L11"] + T2t @ problem.R21_1, problem.R11_1)
    G_minus = right_divide(ops["L11"] - T2t @ problem.R21_1, problem.R11_1)
    sig_vec = sig.rho1_1 + np.einsum("ikm,im->ik", problem.R12_1, nu2)
    printed = np.einsum(
        "ikm,im->ik",
        G_minus,
        sig.rho1_1 - np.einsum("ikm,im->ik", problem.R12_1, nu2),
    )
    reduced = np.einsum("ikm,im->ik", G_plus, sig_vec)
    return float(np.max(np.linalg.norm(printed - reduced, axis=1)))


def assemble_game_closed_loop(
    gsol: GameSolution, feedforward: GameEtaSolution | None = None
) -> GamePolicy:
    """Bundle the equilibrium gains (and feedforwards, if any) as a policy."""
    if feedforward is None:
        return GamePolicy(Theta1=gsol.Theta1, Theta2=gsol.Theta2)
    return GamePolicy(
        Theta1=gsol.Theta1,
        Theta2=gsol.Theta2,
        nu1_bar=feedforward.nu1,
        nu2_bar=feedforward.nu2,
        kappa=feedforward.kappa,
    )


def game_value(gsol: GameSolution, problem: MjlsGameProblem, x, i: int, player: int) -> float:
    """Equilibrium cost of one player from (x, i) for homogeneous problems.

    At the equilibrium the player's value family satisfies the
    closed-loop Lyapunov identity with that player's full closed-loop
    weight, so the cost is the quadratic form <P_k(i) x, x>.
    """
    if not problem.homogeneous:
        raise ValueError("closed-form game values cover homogeneous problems only")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    P = gsol.P1 if player == 1 else gsol.P2
    return float(x @ P[i] @ x)
