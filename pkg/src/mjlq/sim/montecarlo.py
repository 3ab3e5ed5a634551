"""Monte Carlo cost estimation and independent solution verification.

Within a regime segment the closed-loop dynamics are linear with constant
coefficients, so trajectories are propagated through matrix exponentials
rather than ODE stepping; the only integration error left is the composite
Simpson rule applied to the running cost, and the only statistical error is
Monte Carlo averaging over regime paths.  All comparisons (value functions,
cost representations, equilibrium deviations) reuse one batch of paths per
seed, so differences are paired path by path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ..bsde import EtaSolution
from ..care import (
    CareSolution,
    ClosedLoopPolicy,
    assemble_closed_loop,
    care_operator,
    value_function,
)
from ..errors import DimensionMismatch, HorizonTooShort, ValidationError
from ..game import GamePolicy, GameSolution, assemble_game_closed_loop, game_value
from ..linalg import coupled_spectral_abscissa
from ..model import MjlsGameProblem
from ..stability import check_condition_a
from .chain import ChainPath, sample_chain_batch
from .kernels import accumulate_costs, expm_batch

DEFAULT_NSUB = 64
# Decay rate assigned to the feedforward channel of a deviation when the
# problem itself carries no decaying signal.
DEVIATION_KAPPA = 1.0


@dataclass(frozen=True)
class SimOptions:
    """Knobs shared by the Monte Carlo estimators.

    quad_step of None keeps the default 64 Simpson sub-intervals per
    segment; a positive value bounds the sub-interval length instead.
    deviations counts unilateral perturbations per player, split evenly
    between gain and feedforward perturbations.  tail_tol of None accepts
    a truncation tail below one tenth of the statistical error.
    """

    paths: int = 10000
    horizon: float = 30.0
    seed: int = 42
    quad_step: float | None = None
    workers: int = 1
    deviations: int = 20
    tail_tol: float | None = None

    def __post_init__(self):
        if self.paths < 1:
            raise ValidationError(f"paths must be at least 1, got {self.paths}")
        if not self.horizon > 0:
            raise ValidationError(f"horizon must be positive, got {self.horizon}")
        if self.workers < 1:
            raise ValidationError(f"workers must be at least 1, got {self.workers}")
        if self.quad_step is not None and not self.quad_step > 0:
            raise ValidationError(
                f"quad_step must be positive when given, got {self.quad_step}"
            )


def _as_options(opts) -> SimOptions:
    if opts is None:
        return SimOptions()
    if isinstance(opts, SimOptions):
        return opts
    return SimOptions(**dict(opts))


class Segment(NamedTuple):
    x: np.ndarray
    regime: int
    duration: float
    t_start: float


@dataclass(frozen=True)
class TrajectorySample:
    """One integrated closed-loop trajectory.

    segments record the state entering each constant-regime stretch; the
    state itself is continuous across jumps.  cost_contribution is this
    path's realized cost integral (a pair for two-player problems).
    """

    path: ChainPath
    segments: list[Segment]
    cost_contribution: float | tuple[float, float]
    terminal_norm: float


def _check_family(name: str, arr, shape) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.shape != shape:
        raise DimensionMismatch(f"{name} must have shape {shape}, got {out.shape}")
    return out


def _closed_loop_drift(problem, policy):
    """Per-regime drift, feedforward drive, decay rate, and augmentation flag."""
    D, n = problem.D, problem.n
    if isinstance(problem, MjlsGameProblem):
        if not isinstance(policy, GamePolicy):
            raise DimensionMismatch(
                "two-player problems take a GamePolicy, got "
                f"{type(policy).__name__}"
            )
        th1 = _check_family("Theta1", policy.Theta1, (D, problem.m1, n))
        th2 = _check_family("Theta2", policy.Theta2, (D, problem.m2, n))
        acl = problem.A + problem.B1 @ th1 + problem.B2 @ th2
        dbar = np.zeros((D, n))
        has_nu = policy.nu1_bar is not None or policy.nu2_bar is not None
        if policy.nu1_bar is not None:
            nu1 = _check_family("nu1_bar", policy.nu1_bar, (D, problem.m1))
            dbar += np.einsum("dnm,dm->dn", problem.B1, nu1)
        if policy.nu2_bar is not None:
            nu2 = _check_family("nu2_bar", policy.nu2_bar, (D, problem.m2))
            dbar += np.einsum("dnm,dm->dn", problem.B2, nu2)
    else:
        if not isinstance(policy, ClosedLoopPolicy):
            raise DimensionMismatch(
                "single-player problems take a ClosedLoopPolicy, got "
                f"{type(policy).__name__}"
            )
        th = _check_family("Theta", policy.Theta, (D, problem.m, n))
        acl = problem.A + problem.B @ th
        dbar = np.zeros((D, n))
        has_nu = policy.nu_bar is not None
        if policy.nu_bar is not None:
            nu = _check_family("nu_bar", policy.nu_bar, (D, problem.m))
            dbar += np.einsum("dnm,dm->dn", problem.B, nu)

    kappa = getattr(policy, "kappa", None)
    if kappa is None and problem.inhomog is not None:
        kappa = problem.inhomog.kappa
    if problem.inhomog is not None:
        dbar = dbar + problem.inhomog.b
    augmented = has_nu or problem.inhomog is not None
    if augmented and kappa is None:
        raise ValidationError(
            "a feedforward policy needs a decay rate; set the policy's kappa"
        )
    return acl, dbar, (float(kappa) if kappa is not None else None), augmented


def _augment(acl: np.ndarray, dbar: np.ndarray, kappa: float) -> np.ndarray:
    D, n, _ = acl.shape
    M = np.zeros((D, n + 1, n + 1))
    M[:, :n, :n] = acl
    M[:, :n, n] = dbar
    M[:, n, n] = -kappa
    return M


def _policy_matrix_lq(problem, theta, nu, augmented):
    D, n, m = problem.D, problem.n, problem.m
    d = n + 1 if augmented else n
    C = np.zeros((D, n + m, d))
    C[:, :n, :n] = np.eye(n)
    C[:, n:, :n] = theta
    if augmented and nu is not None:
        C[:, n:, n] = nu
    return C


def _policy_matrix_game(problem, th1, th2, nu1, nu2, augmented):
    D, n, m1, m2 = problem.D, problem.n, problem.m1, problem.m2
    d = n + 1 if augmented else n
    C = np.zeros((D, n + m1 + m2, d))
    C[:, :n, :n] = np.eye(n)
    C[:, n : n + m1, :n] = th1
    C[:, n + m1 :, :n] = th2
    if augmented:
        if nu1 is not None:
            C[:, n : n + m1, n] = nu1
        if nu2 is not None:
            C[:, n + m1 :, n] = nu2
    return C


def _fold_linear(K: np.ndarray, C: np.ndarray, g: np.ndarray) -> None:
    # Adds the 2<g, z> running term, z = C xi, into the last state slot
    # (the e^{-kappa t} channel).
    cross = np.einsum("drc,dr->dc", C, g)
    K[:, :, -1] += cross
    K[:, -1, :] += cross


def _lq_cost_stack(problem, theta, nu, augmented) -> np.ndarray:
    St = np.swapaxes(problem.S, -1, -2)
    W = np.block(
        [
            [problem.Q, St],
            [problem.S, problem.R],
        ]
    )
    C = _policy_matrix_lq(problem, theta, nu, augmented)
    K = np.swapaxes(C, -1, -2) @ W @ C
    if augmented and problem.inhomog is not None:
        g = np.concatenate([problem.inhomog.q, problem.inhomog.rho], axis=1)
        _fold_linear(K, C, g)
    K = 0.5 * (K + np.swapaxes(K, -1, -2))
    return K[None]


def _game_cost_stacks(
    problem, th1, th2, nu1, nu2, augmented, players=(1, 2)
) -> np.ndarray:
    C = _policy_matrix_game(problem, th1, th2, nu1, nu2, augmented)
    Ct = np.swapaxes(C, -1, -2)
    sig = problem.inhomog
    stacks = []
    for k in players:
        if k == 1:
            Q, S1, S2 = problem.Q1, problem.S1_1, problem.S2_1
            R11, R12 = problem.R11_1, problem.R12_1
            R21, R22 = problem.R21_1, problem.R22_1
            lin = (sig.q1, sig.rho1_1, sig.rho2_1) if sig is not None else None
        else:
            Q, S1, S2 = problem.Q2, problem.S1_2, problem.S2_2
            R11, R12 = problem.R11_2, problem.R12_2
            R21, R22 = problem.R21_2, problem.R22_2
            lin = (sig.q2, sig.rho1_2, sig.rho2_2) if sig is not None else None
        W = np.block(
            [
                [Q, np.swapaxes(S1, -1, -2), np.swapaxes(S2, -1, -2)],
                [S1, R11, R12],
                [S2, R21, R22],
            ]
        )
        K = Ct @ W @ C
        if augmented and lin is not None:
            _fold_linear(K, C, np.concatenate(lin, axis=1))
        stacks.append(0.5 * (K + np.swapaxes(K, -1, -2)))
    return np.stack(stacks)


def _segment_nsub(durations: np.ndarray, quad_step: float | None) -> np.ndarray:
    if quad_step is None:
        return np.full(durations.shape, DEFAULT_NSUB, dtype=np.int64)
    nsub = np.maximum(2, np.ceil(durations / quad_step).astype(np.int64))
    return nsub + (nsub % 2)


def _encode_paths(paths: Sequence[ChainPath], quad_step: float | None):
    counts = np.asarray([p.n_jumps + 1 for p in paths], dtype=np.int64)
    offsets = np.zeros(counts.shape[0] + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    total = int(offsets[-1])
    regime = np.empty(total, dtype=np.int64)
    dur = np.empty(total, dtype=np.float64)
    pos = 0
    for p in paths:
        for _, duration, reg in p.segments():
            regime[pos] = reg
            dur[pos] = duration
            pos += 1
    return counts, offsets[:-1], regime, dur, _segment_nsub(dur, quad_step)


def _batch_costs(M, K, xi0, paths, quad_step, workers):
    counts, offsets, regime, dur, nsub = _encode_paths(paths, quad_step)
    return accumulate_costs(
        M, K, xi0, counts, offsets, regime, dur, nsub, workers=workers
    )


def _tail_bound(gen, acl, K, kappa, xi0, horizon):
    """Conservative bound on the discarded cost tail past the horizon."""
    abscissa = coupled_spectral_abscissa(acl, gen)
    if not abscissa < 0:
        return math.inf, abscissa
    rho = -2.0 * abscissa if kappa is None else min(2.0 * kappa, -2.0 * abscissa)
    cert = check_condition_a(acl, gen)
    if cert.feasible and cert.P is not None:
        eigs = np.linalg.eigvalsh(cert.P)
        cond = float(np.max(eigs[:, -1] / np.maximum(eigs[:, 0], 1e-300)))
    else:
        cond = 1e6
    kmax = float(max(np.linalg.norm(K[s, i]) for s in range(K.shape[0]) for i in range(K.shape[1])))
    C = 10.0 * kmax * cond * float(xi0 @ xi0) / rho
    return C * math.exp(-rho * horizon), abscissa


def _mc_summary(values: np.ndarray):
    n = values.shape[-1]
    mean = values.mean(axis=-1)
    if n >= 2:
        stderr = values.std(axis=-1, ddof=1) / math.sqrt(n)
    else:
        stderr = np.full(values.shape[:-1], math.nan)
    return mean, stderr


def _check_initial_state(problem, x0, i0):
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
    if x0.shape != (problem.n,):
        raise DimensionMismatch(
            f"x0 must have {problem.n} entries, got shape {x0.shape}"
        )
    if not 0 <= int(i0) < problem.D:
        raise ValidationError(f"initial regime {i0} out of range for D={problem.D}")
    return x0, int(i0)


def _setup(problem, policy, x0):
    acl, dbar, kappa, augmented = _closed_loop_drift(problem, policy)
    if isinstance(problem, MjlsGameProblem):
        K = _game_cost_stacks(
            problem,
            np.asarray(policy.Theta1, dtype=np.float64),
            np.asarray(policy.Theta2, dtype=np.float64),
            policy.nu1_bar,
            policy.nu2_bar,
            augmented,
        )
    else:
        K = _lq_cost_stack(
            problem, np.asarray(policy.Theta, dtype=np.float64), policy.nu_bar, augmented
        )
    if augmented:
        M = _augment(acl, dbar, kappa)
        xi0 = np.concatenate([x0, [1.0]])
    else:
        M = acl
        xi0 = x0.copy()
    return M, K, xi0, acl, kappa


def _tail_target(opts, means, stderrs):
    if opts.tail_tol is not None:
        return float(opts.tail_tol)
    finite = stderrs[np.isfinite(stderrs)]
    stat = 0.1 * float(finite.min()) if finite.size else math.inf
    return max(stat, 1e-12 * (1.0 + float(np.max(np.abs(means)))))


def estimate_cost(problem, policy, x0, i0, opts=None) -> dict:
    """Monte Carlo estimate of the closed-loop cost from (x0, i0).

    Returns a report with keys mean, stderr, tail_bound, paths, horizon,
    and flags; two-player problems report per-player lists.  Raises
    HorizonTooShort when the truncation tail bound is not negligible next
    to the statistical error.
    """
    opts = _as_options(opts)
    x0, i0 = _check_initial_state(problem, x0, i0)
    M, K, xi0, acl, kappa = _setup(problem, policy, x0)
    paths = sample_chain_batch(problem.gen, i0, opts.horizon, opts.seed, opts.paths)
    costs, _ = _batch_costs(M, K, xi0, paths, opts.quad_step, opts.workers)
    means, stderrs = _mc_summary(costs)
    tail, _ = _tail_bound(problem.gen, acl, K, kappa, xi0, opts.horizon)
    target = _tail_target(opts, means, stderrs)
    if not tail <= target:
        raise HorizonTooShort(tail, target, opts.horizon)
    game = isinstance(problem, MjlsGameProblem)
    return {
        "mean": [float(v) for v in means] if game else float(means[0]),
        "stderr": [float(v) for v in stderrs] if game else float(stderrs[0]),
        "tail_bound": float(tail),
        "paths": opts.paths,
        "horizon": opts.horizon,
        "flags": [],
    }


def simulate_closed_loop(problem, policy, x0, i0, path: ChainPath, quad_step=None):
    """Integrate one closed-loop trajectory along a given regime path.

    State propagation across each segment uses a single whole-segment
    matrix exponential; the running cost is accumulated separately by
    composite Simpson on sub-step nodes.
    """
    x0, i0 = _check_initial_state(problem, x0, i0)
    if path.i0 != i0:
        raise ValidationError(
            f"path starts in regime {path.i0}, expected initial regime {i0}"
        )
    M, K, xi0, _, _ = _setup(problem, policy, x0)
    n = problem.n
    S = K.shape[0]

    segs = [(t0, dur, reg) for t0, dur, reg in path.segments()]
    durs = np.asarray([s[1] for s in segs])
    nsub = _segment_nsub(durs, quad_step)
    regs = np.asarray([s[2] for s in segs], dtype=np.int64)
    Eh = expm_batch(M[regs] * (durs / nsub)[:, None, None])
    Efull = expm_batch(M[regs] * durs[:, None, None])

    xi = xi0.copy()
    cost = np.zeros(S)
    recorded = []
    for r, (t0, dur, reg) in enumerate(segs):
        recorded.append(Segment(xi[:n].copy(), int(reg), float(dur), float(t0)))
        h3 = dur / int(nsub[r]) / 3.0
        node = xi.copy()
        acc = np.zeros(S)
        for j in range(int(nsub[r]) + 1):
            w = 1.0 if j in (0, int(nsub[r])) else (4.0 if j % 2 == 1 else 2.0)
            acc += (w * h3) * np.einsum("a,sab,b->s", node, K[:, reg], node)
            if j < int(nsub[r]):
                node = Eh[r] @ node
        cost += acc
        xi = Efull[r] @ xi
    contribution = float(cost[0]) if S == 1 else (float(cost[0]), float(cost[1]))
    return TrajectorySample(
        path=path,
        segments=recorded,
        cost_contribution=contribution,
        terminal_norm=float(np.linalg.norm(xi[:n])),
    )


def trajectory_on_grid(problem, policy, sample: TrajectorySample, times):
    """States and regimes of an integrated trajectory at given times."""
    times = np.asarray(times, dtype=np.float64)
    M, _, _, _, kappa = _setup(
        problem, policy, np.asarray(sample.segments[0].x, dtype=np.float64)
    )
    n = problem.n
    starts = np.asarray([s.t_start for s in sample.segments])
    idx = np.clip(np.searchsorted(starts, times, side="right") - 1, 0, len(starts) - 1)
    regs = np.asarray([sample.segments[k].regime for k in idx], dtype=np.int64)
    dts = times - starts[idx]
    props = expm_batch(M[regs] * dts[:, None, None])
    d = M.shape[-1]
    xi = np.empty((times.shape[0], d))
    for row, k in enumerate(idx):
        seg = sample.segments[k]
        xi[row, :n] = seg.x
        if d > n:
            xi[row, n] = math.exp(-kappa * seg.t_start)
    states = np.einsum("tab,tb->ta", props, xi)
    return states[:, :n], regs


def check_stationarity(problem, care_sol: CareSolution, eta, paths, grid_points=101, x0=None):
    """Residual of the pointwise optimality condition along sampled paths.

    Reconstructs the adjoint state as P(regime)X plus the decaying
    feedforward term and evaluates the feedback optimality condition on a
    uniform time grid of every path.
    """
    policy = assemble_closed_loop(care_sol, problem, eta)
    P = care_sol.P
    D, n, m = problem.D, problem.n, problem.m
    Bt = np.swapaxes(problem.B, -1, -2)
    G = Bt @ P + problem.S + problem.R @ np.asarray(policy.Theta)
    if eta is not None:
        h = np.asarray(eta.h, dtype=np.float64)
        kappa = float(eta.kappa)
        rho = problem.inhomog.rho if problem.inhomog is not None else np.zeros((D, m))
        g = (
            np.einsum("dmn,dn->dm", Bt, h)
            + np.einsum("dab,db->da", problem.R, np.asarray(policy.nu_bar))
            + rho
        )
    else:
        kappa = 0.0
        g = np.zeros((D, m))

    worst = 0.0
    if x0 is None:
        x0 = np.ones(n)
    for path in paths:
        sample = simulate_closed_loop(problem, policy, x0, path.i0, path)
        times = np.linspace(0.0, path.horizon, grid_points)
        states, regs = trajectory_on_grid(problem, policy, sample, times)
        res = np.einsum("tmn,tn->tm", G[regs], states)
        if eta is not None:
            res = res + np.exp(-kappa * times)[:, None] * g[regs]
        worst = max(worst, float(np.max(np.linalg.norm(res, axis=1))))
    return {
        "max_residual": worst,
        "paths": len(paths),
        "grid_points": grid_points,
        "flags": [],
    }


def check_cost_representation(problem, P_tilde, policy, x0, i0, opts=None) -> dict:
    """Monte Carlo test of the completion-of-squares cost identity.

    For an arbitrary symmetric family P_tilde, the realized cost must equal
    the quadratic form at the start plus the integral whose weights shift
    by the generator-coupled Lyapunov terms of P_tilde; both sides are
    estimated on common paths and compared pathwise.
    """
    opts = _as_options(opts)
    if isinstance(problem, MjlsGameProblem):
        raise ValidationError("cost representation check applies to single-player problems")
    x0, i0 = _check_initial_state(problem, x0, i0)
    Pt = np.asarray(P_tilde, dtype=np.float64)
    if Pt.shape != (problem.D, problem.n, problem.n):
        raise DimensionMismatch(
            f"P_tilde must have shape {(problem.D, problem.n, problem.n)}, got {Pt.shape}"
        )
    Pt = 0.5 * (Pt + np.swapaxes(Pt, -1, -2))

    M, K_base, xi0, acl, kappa = _setup(problem, policy, x0)
    augmented = xi0.shape[0] == problem.n + 1

    Mop, Lop = care_operator(Pt, problem)
    W = np.block([[Mop, Lop], [np.swapaxes(Lop, -1, -2), problem.R]])
    theta = np.asarray(policy.Theta, dtype=np.float64)
    C = _policy_matrix_lq(problem, theta, policy.nu_bar, augmented)
    K_rep = np.swapaxes(C, -1, -2) @ W @ C
    if augmented and problem.inhomog is not None:
        qhat = np.einsum("dab,db->da", Pt, problem.inhomog.b) + problem.inhomog.q
        _fold_linear(K_rep, C, np.concatenate([qhat, problem.inhomog.rho], axis=1))
    K_rep = 0.5 * (K_rep + np.swapaxes(K_rep, -1, -2))

    K = np.concatenate([K_base, K_rep[None]], axis=0)
    paths = sample_chain_batch(problem.gen, i0, opts.horizon, opts.seed, opts.paths)
    costs, _ = _batch_costs(M, K, xi0, paths, opts.quad_step, opts.workers)
    offset = float(x0 @ Pt[i0] @ x0)
    delta = costs[0] - costs[1] - offset
    dmean, dstderr = _mc_summary(delta)
    lhs_mean = float(costs[0].mean())
    rhs_mean = offset + float(costs[1].mean())
    tail, _ = _tail_bound(problem.gen, acl, K, kappa, xi0, opts.horizon)
    target = _tail_target(opts, np.asarray([lhs_mean]), np.asarray([dstderr]))
    if not tail <= target:
        raise HorizonTooShort(tail, target, opts.horizon)
    # The floor keeps a pathwise-exact match (both integrands identical)
    # from dividing zero by zero.
    denom = max(float(dstderr), 1e-12 * (1.0 + abs(lhs_mean)))
    n_sigma = abs(float(dmean)) / denom
    flags = [] if n_sigma <= 3.0 else ["cost_representation"]
    return {
        "lhs_mean": lhs_mean,
        "rhs_mean": rhs_mean,
        "difference": float(dmean),
        "stderr": float(dstderr),
        "n_sigma": n_sigma,
        "tail_bound": float(tail),
        "paths": opts.paths,
        "horizon": opts.horizon,
        "flags": flags,
    }


def check_value_function(problem, sol: CareSolution, x0, i0, opts=None, eta=None) -> dict:
    """Compare the predicted optimal value with a Monte Carlo estimate."""
    opts = _as_options(opts)
    x0, i0 = _check_initial_state(problem, x0, i0)
    policy = assemble_closed_loop(sol, problem, eta)
    predicted = value_function(sol, problem, x0, i0, eta)
    report = estimate_cost(problem, policy, x0, i0, opts)
    mean, stderr = report["mean"], report["stderr"]
    gap = abs(mean - predicted)
    # The floor absorbs quadrature-level error when the estimate is
    # deterministic (single-regime chains have zero sampling variance).
    n_sigma = gap / max(stderr, 1e-9 * (1.0 + abs(predicted)))
    rel = gap / max(abs(predicted), 1e-300)
    flags = []
    if n_sigma > 3.0:
        flags.append("value_mismatch")
    return {
        "predicted": float(predicted),
        "mean": mean,
        "stderr": stderr,
        "n_sigma": float(n_sigma),
        "rel_error": float(rel),
        "tail_bound": report["tail_bound"],
        "paths": opts.paths,
        "horizon": opts.horizon,
        "flags": flags,
    }


def check_game_values(problem, gsol: GameSolution, x0, i0, opts=None) -> dict:
    """Compare both players' predicted values with Monte Carlo estimates."""
    opts = _as_options(opts)
    x0, i0 = _check_initial_state(problem, x0, i0)
    policy = assemble_game_closed_loop(gsol)
    predicted = [game_value(gsol, problem, x0, i0, k) for k in (1, 2)]
    report = estimate_cost(problem, policy, x0, i0, opts)
    flags = []
    n_sigmas = []
    for k in range(2):
        gap = abs(report["mean"][k] - predicted[k])
        ns = gap / max(report["stderr"][k], 1e-9 * (1.0 + abs(predicted[k])))
        n_sigmas.append(float(ns))
        if ns > 3.0:
            flags.append(f"value_mismatch_player_{k + 1}")
    return {
        "predicted": predicted,
        "mean": report["mean"],
        "stderr": report["stderr"],
        "n_sigma": n_sigmas,
        "tail_bound": report["tail_bound"],
        "paths": opts.paths,
        "horizon": opts.horizon,
        "flags": flags,
    }


def _deviation_rng(seed: int) -> np.random.Generator:
    # Dedicated stream outside the per-path spawn range.
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(1 << 40,))
    return np.random.Generator(np.random.PCG64(ss))


def _scaled_family(rng, shape, scale):
    raw = rng.standard_normal(shape)
    norms = np.linalg.norm(raw.reshape(shape[0], -1), axis=1)
    return raw * (scale / max(float(norms.max()), 1e-300))


def verify_equilibrium_mc(problem, gsol: GameSolution, feedforward, x0, i0, opts=None) -> dict:
    """Behavioral test of the equilibrium property under unilateral deviations.

    Perturbs one player's gain family (or feedforward family) while the
    other player keeps the feedback form, re-estimating that player's cost
    on the same regime paths; a deviation that lowers the cost by more
    than three standard errors of the paired difference raises a flag.
    """
    opts = _as_options(opts)
    if not isinstance(problem, MjlsGameProblem):
        raise ValidationError("equilibrium verification applies to two-player problems")
    x0, i0 = _check_initial_state(problem, x0, i0)
    base_policy = assemble_game_closed_loop(gsol, feedforward)
    M, K, xi0, acl, kappa = _setup(problem, base_policy, x0)
    paths = sample_chain_batch(problem.gen, i0, opts.horizon, opts.seed, opts.paths)
    base_costs, _ = _batch_costs(M, K, xi0, paths, opts.quad_step, opts.workers)
    means, stderrs = _mc_summary(base_costs)
    tail, _ = _tail_bound(problem.gen, acl, K, kappa, xi0, opts.horizon)
    target = _tail_target(opts, means, stderrs)
    if not tail <= target:
        raise HorizonTooShort(tail, target, opts.horizon)

    n_gain = (opts.deviations + 1) // 2
    n_feed = opts.deviations - n_gain
    rng = _deviation_rng(opts.seed)
    thetas = {1: np.asarray(gsol.Theta1, dtype=np.float64), 2: np.asarray(gsol.Theta2, dtype=np.float64)}
    nus = {
        1: None if base_policy.nu1_bar is None else np.asarray(base_policy.nu1_bar),
        2: None if base_policy.nu2_bar is None else np.asarray(base_policy.nu2_bar),
    }
    m_of = {1: problem.m1, 2: problem.m2}

    # Draw every perturbation up front in a fixed order so results do not
    # depend on evaluation order.
    drawn = {}
    for player in (1, 2):
        th = thetas[player]
        g_scale = 0.05 * (1.0 + float(np.max(np.linalg.norm(th.reshape(problem.D, -1), axis=1))))
        base_nu = nus[player]
        f_norm = 0.0 if base_nu is None else float(np.max(np.linalg.norm(base_nu, axis=1)))
        f_scale = 0.05 * (1.0 + f_norm)
        drawn[(player, "gain")] = [
            _scaled_family(rng, th.shape, g_scale) for _ in range(n_gain)
        ]
        drawn[(player, "feedforward")] = [
            _scaled_family(rng, (problem.D, m_of[player]), f_scale) for _ in range(n_feed)
        ]

    dev_kappa = kappa if kappa is not None else DEVIATION_KAPPA
    records = []
    flags = []
    max_tail = tail
    for player in (1, 2):
        for kind in ("gain", "feedforward"):
            for delta in drawn[(player, kind)]:
                th1, th2 = thetas[1], thetas[2]
                nu1, nu2 = nus[1], nus[2]
                if kind == "gain":
                    if player == 1:
                        th1 = th1 + delta
                    else:
                        th2 = th2 + delta
                else:
                    if player == 1:
                        nu1 = delta if nu1 is None else nu1 + delta
                    else:
                        nu2 = delta if nu2 is None else nu2 + delta
                dev_policy = GamePolicy(
                    Theta1=th1,
                    Theta2=th2,
                    nu1_bar=nu1,
                    nu2_bar=nu2,
                    kappa=dev_kappa if (nu1 is not None or nu2 is not None) else None,
                )
                acl_dev, _, kap_dev, _ = _closed_loop_drift(problem, dev_policy)
                abscissa_dev = coupled_spectral_abscissa(acl_dev, problem.gen)
                record = {
                    "player": player,
                    "kind": kind,
                    "delta_norm": float(np.max(np.linalg.norm(delta.reshape(problem.D, -1), axis=1))),
                }
                if not abscissa_dev < 0:
                    record.update(delta_j=math.inf, stderr=0.0, n_sigma=math.inf, stable=False)
                    records.append(record)
                    continue
                Md, Kd, xid, _, _ = _setup(problem, dev_policy, x0)
                Kd = Kd[player - 1 : player]
                dev_costs, _ = _batch_costs(Md, Kd, xid, paths, opts.quad_step, opts.workers)
                base_k = base_costs[player - 1]
                diff = dev_costs[0] - base_k
                dmean, dstderr = _mc_summary(diff)
                tail_dev, _ = _tail_bound(problem.gen, acl_dev, Kd, kap_dev, xid, opts.horizon)
                max_tail = max(max_tail, tail_dev)
                ns = float(dmean) / float(dstderr) if dstderr > 0 else math.inf
                record.update(
                    delta_j=float(dmean),
                    stderr=float(dstderr),
                    n_sigma=float(ns),
                    stable=True,
                )
                records.append(record)
                if dmean < -3.0 * dstderr:
                    flags.append(
                        f"player {player} improves cost by {kind} deviation: "
                        f"delta_j={float(dmean):.6g}, stderr={float(dstderr):.6g}"
                    )
    return {
        "mean": [float(v) for v in means],
        "stderr": [float(v) for v in stderrs],
        "tail_bound": float(max_tail),
        "deviations": records,
        "paths": opts.paths,
        "horizon": opts.horizon,
        "flags": flags,
    }


def check_martingale_drift(gen, F, c, sol: EtaSolution, i0, opts=None) -> dict:
    """Monte Carlo check that the compensated ansatz process has zero drift.

    Along each path, the solution h evaluated at the running regime plus
    the time integral of its drift must have mean zero at the horizon;
    the segment integrals of the decaying weight are exact.
    """
    opts = _as_options(opts)
    F = np.asarray(F, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    h = np.asarray(sol.h, dtype=np.float64)
    kappa = float(sol.kappa)
    drift = np.einsum("dab,db->da", F, h) + c
    paths = sample_chain_batch(gen, int(i0), opts.horizon, opts.seed, opts.paths)
    vals = np.empty((len(paths), h.shape[1]))
    for p, path in enumerate(paths):
        acc = math.exp(-kappa * path.horizon) * h[path.regime_at(path.horizon)] - h[path.i0]
        for t0, dur, reg in path.segments():
            if kappa == 0.0:
                weight = dur
            else:
                weight = (math.exp(-kappa * t0) - math.exp(-kappa * (t0 + dur))) / kappa
            acc = acc + weight * drift[reg]
        vals[p] = acc
    mean, stderr = _mc_summary(vals.T)
    n_sigma = float(np.max(np.abs(mean) / np.maximum(stderr, 1e-300)))
    flags = [] if n_sigma <= 3.0 else ["martingale_drift"]
    return {
        "mean": [float(v) for v in mean],
        "stderr": [float(v) for v in stderr],
        "n_sigma": n_sigma,
        "paths": opts.paths,
        "horizon": opts.horizon,
        "flags": flags,
    }
