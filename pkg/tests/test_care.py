import numpy as np
import pytest

from mjlq.care import (
    assemble_closed_loop,
    care_residual,
    membership_in_G,
    solve_care,
    value_function,
)
from mjlq.errors import NotConverged
from mjlq.model import validate_lq_problem


def scalar_problem():
    return validate_lq_problem(
        np.zeros((1, 1)),
        A=[[[-1.0]]],
        B=[[[1.0]]],
        Q=[[[1.0]]],
        S=[[[0.0]]],
        R=[[[1.0]]],
    )


def test_scalar_riccati_oracle():
    # -2p - p^2 + 1 = 0 has the stabilizing root p = sqrt(2) - 1.
    sol = solve_care(scalar_problem())
    assert sol.P[0, 0, 0] == pytest.approx(np.sqrt(2.0) - 1.0, abs=1e-10)
    assert sol.Theta[0, 0, 0] == pytest.approx(1.0 - np.sqrt(2.0), abs=1e-10)
    assert sol.certificate.feasible


def test_benchmark_matches_reference(benchmark_lq, benchmark_lq_expected):
    sol = solve_care(benchmark_lq)
    np.testing.assert_allclose(sol.P, benchmark_lq_expected["P"], atol=1e-6)
    np.testing.assert_allclose(
        sol.Theta, benchmark_lq_expected["Theta"], atol=1e-6
    )
    assert np.max(sol.residual_norms) <= 1e-7
    assert sol.certificate.feasible


def test_residual_at_reference_solution(benchmark_lq, benchmark_lq_expected):
    res = care_residual(benchmark_lq_expected["P"], benchmark_lq)
    norms = np.linalg.norm(res, axis=(1, 2))
    assert np.all(norms <= 2e-7)


def test_newton_iterations_decrease_residual(benchmark_lq):
    sol = solve_care(benchmark_lq)
    history = np.asarray(sol.residual_history)
    assert history.size >= 2
    assert history[-1] < history[0]
    assert sol.iterations <= 20


def test_warm_start_converges_quickly(benchmark_lq):
    first = solve_care(benchmark_lq)
    again = solve_care(benchmark_lq, theta0=first.Theta)
    assert again.iterations <= 3
    np.testing.assert_allclose(again.P, first.P, atol=1e-9)


def test_not_converged_raised_on_tiny_budget(benchmark_lq):
    with pytest.raises(NotConverged):
        solve_care(benchmark_lq, max_iter=1)


def test_solution_is_symmetric_and_psd(benchmark_lq):
    sol = solve_care(benchmark_lq)
    np.testing.assert_allclose(sol.P, np.swapaxes(sol.P, 1, 2), atol=1e-12)
    for i in range(sol.P.shape[0]):
        assert np.min(np.linalg.eigvalsh(sol.P[i])) >= -1e-10


def test_gain_consistent_with_solution(benchmark_lq):
    sol = solve_care(benchmark_lq)
    expected = -np.linalg.solve(
        benchmark_lq.R,
        np.swapaxes(benchmark_lq.B, 1, 2) @ sol.P + benchmark_lq.S,
    )
    np.testing.assert_allclose(sol.Theta, expected, atol=1e-12)


def test_membership_certificate(benchmark_lq):
    sol = solve_care(benchmark_lq)
    assert membership_in_G(sol.P, benchmark_lq)
    n = benchmark_lq.A.shape[1]
    bad = np.broadcast_to(-1e3 * np.eye(n), sol.P.shape)
    assert not membership_in_G(bad, benchmark_lq)


def test_value_function_is_quadratic_when_homogeneous(benchmark_lq):
    sol = solve_care(benchmark_lq)
    rng = np.random.default_rng(5)
    for _ in range(5):
        x = rng.standard_normal(3)
        for i in range(3):
            direct = float(x @ sol.P[i] @ x)
            assert value_function(sol, benchmark_lq, x, i) == pytest.approx(
                direct, rel=1e-12
            )


def test_assembled_policy_shapes(benchmark_lq):
    sol = solve_care(benchmark_lq)
    policy = assemble_closed_loop(sol, benchmark_lq)
    assert policy.Theta.shape == sol.Theta.shape
    assert policy.nu_bar is None
    assert policy.kappa is None
