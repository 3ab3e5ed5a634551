import json

import numpy as np
import pytest

from mjlq.errors import IndefiniteCrossWeightWarning, ValidationError
from mjlq.model import (
    load_problem,
    problem_from_dict,
    problem_to_dict,
    save_problem,
    stationary_distribution,
    validate_game_problem,
    validate_generator,
    validate_lq_problem,
)


def two_regime_lq(inhomog=None):
    gen = np.array([[-0.5, 0.5], [1.0, -1.0]])
    A = np.stack([[[-0.2, 1.0], [0.0, -0.5]], [[0.1, 0.0], [0.3, -1.0]]])
    B = np.stack([[[0.0], [1.0]], [[1.0], [0.5]]])
    Q = np.stack([np.eye(2), 2 * np.eye(2)])
    S = np.zeros((2, 1, 2))
    R = np.array([[[1.0]], [[2.0]]])
    return validate_lq_problem(gen, A=A, B=B, Q=Q, S=S, R=R, inhomog=inhomog)


def test_generator_rejects_negative_offdiagonal():
    with pytest.raises(ValidationError):
        validate_generator([[-1.0, -0.1], [0.5, -0.5]])


def test_generator_rejects_bad_row_sums():
    with pytest.raises(ValidationError):
        validate_generator([[-1.0, 0.9], [0.5, -0.5]])


def test_generator_accepts_valid_matrix():
    gen = validate_generator([[-2.0, 2.0], [3.0, -3.0]])
    assert gen.D == 2
    assert np.allclose(gen.pi.sum(axis=1), 0.0)


def test_stationary_distribution_balances_rates():
    gen = validate_generator([[-1.0, 1.0], [2.0, -2.0]])
    mu = stationary_distribution(gen)
    np.testing.assert_allclose(mu, [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)
    np.testing.assert_allclose(mu @ gen.pi, 0.0, atol=1e-12)


def test_lq_problem_shape_mismatch_raises():
    gen = np.array([[-0.5, 0.5], [1.0, -1.0]])
    A = np.zeros((2, 2, 2))
    B = np.zeros((2, 3, 1))
    with pytest.raises(ValidationError):
        validate_lq_problem(gen, A=A, B=B, Q=np.zeros((2, 2, 2)),
                            S=np.zeros((2, 1, 2)), R=np.ones((2, 1, 1)))


def test_lq_problem_rejects_indefinite_r():
    gen = np.zeros((1, 1))
    with pytest.raises(ValidationError):
        validate_lq_problem(gen, A=[[[-1.0]]], B=[[[1.0]]], Q=[[[1.0]]],
                            S=[[[0.0]]], R=[[[-1.0]]])


def test_lq_roundtrip_through_dict():
    problem = two_regime_lq()
    again = problem_from_dict(problem_to_dict(problem))
    np.testing.assert_array_equal(problem.A, again.A)
    np.testing.assert_array_equal(problem.B, again.B)
    np.testing.assert_array_equal(problem.Q, again.Q)
    np.testing.assert_array_equal(problem.R, again.R)
    np.testing.assert_array_equal(problem.gen.pi, again.gen.pi)
    assert again.inhomog is None


def test_lq_roundtrip_with_forcing_terms():
    inhomog = {
        "kappa": 0.8,
        "b": [[0.3, -0.1], [0.0, 0.2]],
        "q": [[0.1, 0.0], [-0.2, 0.1]],
        "rho": [[0.05], [-0.1]],
    }
    problem = two_regime_lq(inhomog=inhomog)
    again = problem_from_dict(problem_to_dict(problem))
    assert again.inhomog is not None
    assert again.inhomog.kappa == problem.inhomog.kappa
    np.testing.assert_array_equal(problem.inhomog.b, again.inhomog.b)
    np.testing.assert_array_equal(problem.inhomog.q, again.inhomog.q)
    np.testing.assert_array_equal(problem.inhomog.rho, again.inhomog.rho)


def test_save_and_load_problem(tmp_path):
    problem = two_regime_lq()
    path = tmp_path / "problem.json"
    save_problem(problem, path)
    again = load_problem(path)
    np.testing.assert_array_equal(problem.A, again.A)


def test_load_problem_detects_two_player(tmp_path, benchmark_game):
    doc = problem_to_dict(benchmark_game)
    assert "m1" in doc
    path = tmp_path / "game.json"
    path.write_text(json.dumps(doc))
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IndefiniteCrossWeightWarning)
        again = load_problem(path)
    np.testing.assert_array_equal(benchmark_game.B1, again.B1)
    np.testing.assert_array_equal(benchmark_game.R12_1, again.R12_1)


def test_game_validation_fills_optional_blocks():
    gen = np.zeros((1, 1))
    one = [[[1.0]]]
    zero = [[[0.0]]]
    problem = validate_game_problem(
        gen, A=[[[-1.0]]], B1=one, B2=one,
        Q1=one, S1_1=zero, S2_1=zero, R11_1=one, R12_1=zero, R22_1=one,
        Q2=one, S1_2=zero, S2_2=zero, R11_2=one, R12_2=zero, R22_2=one,
    )
    np.testing.assert_array_equal(problem.R21_1, np.zeros((1, 1, 1)))
    np.testing.assert_array_equal(problem.R21_2, np.zeros((1, 1, 1)))


def test_indefinite_cross_weight_warns():
    gen = np.zeros((1, 1))
    one = [[[1.0]]]
    zero = [[[0.0]]]
    with pytest.warns(IndefiniteCrossWeightWarning):
        validate_game_problem(
            gen, A=[[[-1.0]]], B1=one, B2=one,
            Q1=one, S1_1=zero, S2_1=zero, R11_1=one, R12_1=zero,
            R22_1=[[[-0.5]]],
            Q2=one, S1_2=zero, S2_2=zero, R11_2=one, R12_2=zero, R22_2=one,
        )


def test_benchmark_fixture_dimensions(benchmark_lq):
    assert benchmark_lq.gen.D == 3
    assert benchmark_lq.A.shape == (3, 3, 3)
    assert benchmark_lq.B.shape[0] == 3
    assert benchmark_lq.inhomog is None


def test_benchmark_game_fixture_dimensions(benchmark_game):
    assert benchmark_game.gen.D == 3
    assert benchmark_game.A.shape == (3, 3, 3)
    assert benchmark_game.B1.shape == benchmark_game.B2.shape
    assert benchmark_game.inhomog is None
