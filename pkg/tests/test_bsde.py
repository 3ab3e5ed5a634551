import numpy as np
import pytest

from mjlq.bsde import (
    build_eta_system_lq,
    jump_compensation_amplitudes,
    solve_linear_bsde_stationary,
    solve_linear_bsde_truncated,
    solve_lq_feedforward,
)
from mjlq.care import assemble_closed_loop, solve_care
from mjlq.model import validate_generator, validate_lq_problem

GEN2 = [[-1.0, 1.0], [2.0, -2.0]]
F2 = np.array(
    [[[-1.0, 0.3], [0.0, -0.8]], [[-0.5, 0.0], [0.2, -1.2]]]
)


def inhomogeneous_problem():
    gen = np.array([[-0.5, 0.5], [1.0, -1.0]])
    A = np.stack([[[-0.2, 1.0], [0.0, -0.5]], [[0.1, 0.0], [0.3, -1.0]]])
    B = np.stack([[[0.0], [1.0]], [[1.0], [0.5]]])
    Q = np.stack([np.eye(2), 2 * np.eye(2)])
    S = np.zeros((2, 1, 2))
    R = np.array([[[1.0]], [[2.0]]])
    inhomog = {
        "kappa": 0.8,
        "b": [[0.3, -0.1], [0.0, 0.2]],
        "q": [[0.1, 0.0], [-0.2, 0.1]],
        "rho": [[0.05], [-0.1]],
    }
    return validate_lq_problem(gen, A=A, B=B, Q=Q, S=S, R=R, inhomog=inhomog)


def test_scalar_stationary_oracle_one_half():
    # (kappa - a) h = c with kappa = 1, a = -1, c = 1 gives h = 1/2.
    sol = solve_linear_bsde_stationary([[[-1.0]]], [[0.0]], [[1.0]], 1.0)
    assert sol.h[0, 0] == pytest.approx(0.5, abs=1e-14)
    assert sol.kappa == 1.0
    assert sol.residual <= 1e-14


def test_scalar_stationary_oracle_sqrt2():
    # (1 + sqrt(2)) h = 1 gives h = sqrt(2) - 1.
    sol = solve_linear_bsde_stationary(
        [[[-np.sqrt(2.0)]]], [[0.0]], [[1.0]], 1.0
    )
    assert sol.h[0, 0] == pytest.approx(np.sqrt(2.0) - 1.0, abs=1e-12)


def test_stationary_matches_truncated_integration():
    gen = validate_generator(GEN2)
    rng = np.random.default_rng(2)
    c = rng.standard_normal((2, 2))
    kappa = 0.7
    stationary = solve_linear_bsde_stationary(F2, gen, c, kappa)

    def phi(t):
        return np.exp(-kappa * t) * c

    y = solve_linear_bsde_truncated(F2, gen, phi, T=40.0, steps=4000)
    assert np.max(np.abs(y[0] - stationary.h)) <= 1e-5


def test_truncation_tail_decays_with_horizon():
    # Doubling the horizon from 15 to 30 moves the time-0 value by less
    # than exp(-rho*15) with rho = min(kappa, 1) here.
    gen = validate_generator([[0.0]])
    kappa = 1.0

    def phi(t):
        return np.exp(-kappa * t) * np.ones((1, 1))

    y15 = solve_linear_bsde_truncated([[[-1.0]]], gen, phi, T=15.0, steps=1500)
    y30 = solve_linear_bsde_truncated([[[-1.0]]], gen, phi, T=30.0, steps=3000)
    diff = float(np.max(np.abs(y30[0] - y15[0])))
    assert diff < 1e-4
    assert diff < np.exp(-15.0)


def test_stationary_solution_is_linear_in_forcing():
    gen = validate_generator(GEN2)
    rng = np.random.default_rng(9)
    c1 = rng.standard_normal((2, 2))
    c2 = rng.standard_normal((2, 2))
    h1 = solve_linear_bsde_stationary(F2, gen, c1, 0.5).h
    h2 = solve_linear_bsde_stationary(F2, gen, c2, 0.5).h
    combined = solve_linear_bsde_stationary(F2, gen, c1 + 2.0 * c2, 0.5).h
    np.testing.assert_allclose(combined, h1 + 2.0 * h2, atol=1e-12)


def test_jump_amplitudes_are_pairwise_differences():
    gen = validate_generator(GEN2)
    sol = solve_linear_bsde_stationary(F2, gen, np.ones((2, 2)), 1.0)
    z = jump_compensation_amplitudes(sol)
    for i in range(2):
        for j in range(2):
            np.testing.assert_allclose(z[i, j], sol.h[j] - sol.h[i])


def test_truncated_rejects_bad_input():
    gen = validate_generator(GEN2)
    with pytest.raises(ValueError):
        solve_linear_bsde_truncated(F2, gen, np.zeros((3, 2, 2)), T=1.0, steps=20)
    with pytest.raises(ValueError):
        solve_linear_bsde_truncated(
            F2, gen, lambda t: np.zeros((2, 2)), T=1.0, steps=5
        )


def test_feedforward_solves_the_drift_system():
    problem = inhomogeneous_problem()
    sol = solve_care(problem)
    eta = solve_lq_feedforward(sol, problem)
    assert eta.kappa == problem.inhomog.kappa
    assert eta.residual <= 1e-12
    F, c = build_eta_system_lq(sol, problem)
    lhs = (
        eta.kappa * eta.h
        - np.einsum("ikl,il->ik", F, eta.h)
        - problem.gen.pi @ eta.h
        - c
    )
    np.testing.assert_allclose(lhs, 0.0, atol=1e-12)


def test_eta_system_accepts_bare_value_family():
    problem = inhomogeneous_problem()
    sol = solve_care(problem)
    F1, c1 = build_eta_system_lq(sol, problem)
    F2_, c2 = build_eta_system_lq(sol.P, problem)
    np.testing.assert_array_equal(F1, F2_)
    np.testing.assert_array_equal(c1, c2)


def test_assembled_feedforward_gain():
    problem = inhomogeneous_problem()
    sol = solve_care(problem)
    eta = solve_lq_feedforward(sol, problem)
    policy = assemble_closed_loop(sol, problem, eta)
    expected = -np.linalg.solve(
        problem.R,
        (
            np.swapaxes(problem.B, 1, 2) @ eta.h[:, :, None]
            + problem.inhomog.rho[:, :, None]
        ),
    )[:, :, 0]
    np.testing.assert_allclose(policy.nu_bar, expected, atol=1e-12)
    assert policy.kappa == eta.kappa
