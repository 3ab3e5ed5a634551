import numpy as np
import pytest

from mjlq.care import solve_care
from mjlq.errors import NotConverged
from mjlq.game import (
    assemble_game_closed_loop,
    effective_lq_problem,
    game_residuals,
    game_value,
    solve_game,
    solve_game_feedforward,
)
from mjlq.model import validate_game_problem, validate_lq_problem


def symmetric_scalar_game(inhomog=None):
    # Each player pays for the drift state, their own control, and the
    # rival's control with unit weights.
    gen = np.zeros((1, 1))
    one = [[[1.0]]]
    zero = [[[0.0]]]
    return validate_game_problem(
        gen, A=[[[-1.0]]], B1=one, B2=one,
        Q1=one, S1_1=zero, S2_1=zero, R11_1=one, R12_1=zero, R22_1=one,
        Q2=one, S1_2=zero, S2_2=zero, R11_2=one, R12_2=zero, R22_2=one,
        inhomog=inhomog,
    )


def decoupled_game():
    # Player 2 has no control authority, so player 1 faces a plain
    # single-controller problem.
    gen = np.zeros((1, 1))
    one = [[[1.0]]]
    zero = [[[0.0]]]
    return validate_game_problem(
        gen, A=[[[-1.0]]], B1=one, B2=zero,
        Q1=one, S1_1=zero, S2_1=zero, R11_1=one, R12_1=zero, R22_1=zero,
        Q2=one, S1_2=zero, S2_2=zero, R11_2=zero, R12_2=zero, R22_2=one,
    )


def test_symmetric_scalar_equilibrium_oracle():
    # The symmetric equilibrium solves 2p^2 + 2p - 1 = 0, so
    # p = (-1 + sqrt(3)) / 2 for both players.
    gsol = solve_game(symmetric_scalar_game())
    p = (-1.0 + np.sqrt(3.0)) / 2.0
    assert gsol.P1[0, 0, 0] == pytest.approx(p, abs=1e-9)
    assert gsol.P2[0, 0, 0] == pytest.approx(p, abs=1e-9)
    assert gsol.Theta1[0, 0, 0] == pytest.approx(-p, abs=1e-9)
    assert gsol.Theta2[0, 0, 0] == pytest.approx(-p, abs=1e-9)
    assert gsol.certificate.feasible


def test_symmetric_data_gives_symmetric_solution():
    gsol = solve_game(symmetric_scalar_game())
    np.testing.assert_allclose(gsol.P1, gsol.P2, atol=1e-9)
    np.testing.assert_allclose(gsol.Theta1, gsol.Theta2, atol=1e-9)


def test_benchmark_matches_reference(benchmark_game, benchmark_game_expected):
    gsol = solve_game(benchmark_game)
    ref = benchmark_game_expected
    np.testing.assert_allclose(gsol.P1, ref["P1"], atol=1e-6)
    np.testing.assert_allclose(gsol.P2, ref["P2"], atol=1e-6)
    np.testing.assert_allclose(gsol.Theta1, ref["Theta1"], atol=1e-6)
    np.testing.assert_allclose(gsol.Theta2, ref["Theta2"], atol=1e-6)
    assert np.max(gsol.residual_norms_1) <= 1.5e-7
    assert np.max(gsol.residual_norms_2) <= 1.5e-7
    assert gsol.constraint_residual <= 1e-10
    assert gsol.certificate.feasible


def test_residual_families_match_reported_norms(benchmark_game):
    gsol = solve_game(benchmark_game)
    E1, E2 = game_residuals(
        gsol.P1, gsol.P2, gsol.Theta1, gsol.Theta2, benchmark_game
    )
    np.testing.assert_allclose(
        np.linalg.norm(E1, axis=(1, 2)), gsol.residual_norms_1, atol=1e-12
    )
    np.testing.assert_allclose(
        np.linalg.norm(E2, axis=(1, 2)), gsol.residual_norms_2, atol=1e-12
    )


def test_powerless_rival_reduces_to_single_controller():
    game = decoupled_game()
    gsol = solve_game(game)
    lq = validate_lq_problem(
        np.zeros((1, 1)), A=[[[-1.0]]], B=[[[1.0]]],
        Q=[[[1.0]]], S=[[[0.0]]], R=[[[1.0]]],
    )
    sol = solve_care(lq)
    np.testing.assert_allclose(gsol.P1, sol.P, atol=1e-9)
    np.testing.assert_allclose(gsol.Theta1, sol.Theta, atol=1e-9)
    np.testing.assert_allclose(gsol.Theta2, 0.0, atol=1e-12)


def test_effective_problem_reproduces_player_solution(benchmark_game):
    gsol = solve_game(benchmark_game)
    eff1 = effective_lq_problem(benchmark_game, 1, gsol.Theta2)
    sol1 = solve_care(eff1, theta0=gsol.Theta1)
    np.testing.assert_allclose(sol1.P, gsol.P1, atol=1e-8)
    eff2 = effective_lq_problem(benchmark_game, 2, gsol.Theta1)
    sol2 = solve_care(eff2, theta0=gsol.Theta2)
    np.testing.assert_allclose(sol2.P, gsol.P2, atol=1e-8)


def test_not_converged_on_tiny_budget(benchmark_game):
    with pytest.raises(NotConverged):
        solve_game(benchmark_game, max_iter=1)


def test_game_value_is_quadratic(benchmark_game):
    gsol = solve_game(benchmark_game)
    rng = np.random.default_rng(3)
    x = rng.standard_normal(3)
    for i in range(3):
        assert game_value(gsol, benchmark_game, x, i, 1) == pytest.approx(
            float(x @ gsol.P1[i] @ x), rel=1e-12
        )
        assert game_value(gsol, benchmark_game, x, i, 2) == pytest.approx(
            float(x @ gsol.P2[i] @ x), rel=1e-12
        )


def test_feedforward_solves_both_players():
    inhomog = {
        "kappa": 0.9,
        "b": [[0.2]],
        "q1": [[0.1]],
        "rho1_1": [[0.0]],
        "rho2_1": [[0.05]],
        "q2": [[-0.1]],
        "rho1_2": [[0.02]],
        "rho2_2": [[0.0]],
    }
    game = symmetric_scalar_game(inhomog=inhomog)
    gsol = solve_game(game)
    ff = solve_game_feedforward(gsol, game)
    assert ff.kappa == 0.9
    assert ff.residual <= 1e-10
    assert ff.constraint_residual <= 1e-10
    assert np.isfinite(ff.drift_gap)


def test_assembled_game_policy_carries_feedforward():
    inhomog = {
        "kappa": 0.9,
        "b": [[0.2]],
        "q1": [[0.1]],
        "rho1_1": [[0.0]],
        "rho2_1": [[0.05]],
        "q2": [[-0.1]],
        "rho1_2": [[0.02]],
        "rho2_2": [[0.0]],
    }
    game = symmetric_scalar_game(inhomog=inhomog)
    gsol = solve_game(game)
    ff = solve_game_feedforward(gsol, game)
    policy = assemble_game_closed_loop(gsol, ff)
    np.testing.assert_array_equal(policy.Theta1, gsol.Theta1)
    np.testing.assert_array_equal(policy.nu1_bar, ff.nu1)
    np.testing.assert_array_equal(policy.nu2_bar, ff.nu2)
    assert policy.kappa == 0.9

    bare = assemble_game_closed_loop(gsol)
    assert bare.nu1_bar is None
    assert bare.kappa is None


def test_game_value_rejects_forced_problems():
    inhomog = {
        "kappa": 0.9,
        "b": [[0.2]],
        "q1": [[0.1]],
        "rho1_1": [[0.0]],
        "rho2_1": [[0.05]],
        "q2": [[-0.1]],
        "rho1_2": [[0.02]],
        "rho2_2": [[0.0]],
    }
    game = symmetric_scalar_game(inhomog=inhomog)
    gsol = solve_game(game)
    with pytest.raises(ValueError):
        game_value(gsol, game, np.ones(1), 0, 1)
