import numpy as np
import pytest

from mjlq.errors import ValidationError
from mjlq.linalg import (
    coupled_lyapunov_operator,
    coupled_lyapunov_solve,
    coupled_spectral_abscissa,
    is_positive_definite,
    smat,
    svec,
    svec_width,
)
from mjlq.model import validate_generator


def random_symmetric(rng, n):
    raw = rng.standard_normal((n, n))
    return 0.5 * (raw + raw.T)


def test_svec_smat_roundtrip():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3, 5, 8):
        X = random_symmetric(rng, n)
        v = svec(X)
        assert v.shape == (svec_width(n),)
        np.testing.assert_allclose(smat(v, n), X, atol=1e-14)


def test_svec_is_an_isometry():
    rng = np.random.default_rng(1)
    for _ in range(10):
        X = random_symmetric(rng, 4)
        assert np.linalg.norm(svec(X)) == pytest.approx(
            np.linalg.norm(X, "fro"), abs=1e-13
        )


def test_scalar_lyapunov_solution():
    # 2*(-1)*p + 1 = 0 has the unique solution p = 1/2.
    gen = validate_generator([[0.0]])
    P = coupled_lyapunov_solve(np.array([[[-1.0]]]), gen, np.array([[[1.0]]]))
    assert P[0, 0, 0] == pytest.approx(0.5, abs=1e-14)


def test_two_regime_lyapunov_solution():
    # Scalar drifts -1 and -2 under symmetric unit switching with W = 1
    # give p = (3/7, 2/7).
    gen = validate_generator([[-1.0, 1.0], [1.0, -1.0]])
    A = np.array([[[-1.0]], [[-2.0]]])
    W = np.ones((2, 1, 1))
    P = coupled_lyapunov_solve(A, gen, W)
    assert P[0, 0, 0] == pytest.approx(3.0 / 7.0, abs=1e-10)
    assert P[1, 0, 0] == pytest.approx(2.0 / 7.0, abs=1e-10)


def test_lyapunov_solve_satisfies_the_equation():
    rng = np.random.default_rng(7)
    gen = validate_generator([[-1.0, 0.6, 0.4], [0.2, -0.5, 0.3], [0.1, 0.9, -1.0]])
    for _ in range(5):
        A = rng.standard_normal((3, 4, 4)) - 3.0 * np.eye(4)
        W = np.stack([random_symmetric(rng, 4) for _ in range(3)])
        P = coupled_lyapunov_solve(A, gen, W)
        lhs = (
            np.swapaxes(A, 1, 2) @ P
            + P @ A
            + np.einsum("ij,jkl->ikl", gen.pi, P)
            + W
        )
        np.testing.assert_allclose(lhs, 0.0, atol=1e-10)
        np.testing.assert_allclose(P, np.swapaxes(P, 1, 2), atol=1e-12)


def test_operator_matrix_matches_direct_application():
    rng = np.random.default_rng(11)
    gen = validate_generator([[-0.7, 0.7], [0.3, -0.3]])
    A = rng.standard_normal((2, 3, 3))
    L = coupled_lyapunov_operator(A, gen)
    P = np.stack([random_symmetric(rng, 3) for _ in range(2)])
    applied = smat_family(L @ np.concatenate([svec(P[0]), svec(P[1])]), 3, 2)
    direct = (
        np.swapaxes(A, 1, 2) @ P + P @ A + np.einsum("ij,jkl->ikl", gen.pi, P)
    )
    np.testing.assert_allclose(applied, direct, atol=1e-12)


def smat_family(v, n, D):
    w = svec_width(n)
    return np.stack([smat(v[i * w:(i + 1) * w], n) for i in range(D)])


def test_abscissa_scalar_cases():
    gen1 = validate_generator([[0.0]])
    assert coupled_spectral_abscissa(np.array([[[-1.0]]]), gen1) == pytest.approx(
        -2.0, abs=1e-12
    )
    assert coupled_spectral_abscissa(np.array([[[0.5]]]), gen1) == pytest.approx(
        1.0, abs=1e-12
    )


def test_abscissa_two_regime_oracle():
    # Coupling matrix [[-3, 1], [1, -5]] has largest eigenvalue -4 + sqrt(2).
    gen = validate_generator([[-1.0, 1.0], [1.0, -1.0]])
    A = np.array([[[-1.0]], [[-2.0]]])
    assert coupled_spectral_abscissa(A, gen) == pytest.approx(
        -4.0 + np.sqrt(2.0), abs=1e-10
    )


def test_abscissa_single_regime_matches_eigenvalues():
    # Without switching, the second-moment rate is twice the dominant
    # real part of the drift spectrum.
    rng = np.random.default_rng(13)
    gen = validate_generator([[0.0]])
    for _ in range(5):
        A = rng.standard_normal((4, 4))
        expected = 2.0 * np.max(np.linalg.eigvals(A).real)
        assert coupled_spectral_abscissa(A[None], gen) == pytest.approx(
            expected, abs=1e-10
        )


def test_negative_abscissa_gives_positive_definite_solution():
    rng = np.random.default_rng(17)
    gen = validate_generator([[-0.4, 0.4], [0.8, -0.8]])
    A = rng.standard_normal((2, 3, 3)) - 4.0 * np.eye(3)
    assert coupled_spectral_abscissa(A, gen) < 0
    P = coupled_lyapunov_solve(A, gen, np.broadcast_to(np.eye(3), (2, 3, 3)))
    assert is_positive_definite(P, 0.0)


def test_lyapunov_rejects_mismatched_weight():
    gen = validate_generator([[0.0]])
    with pytest.raises((ValidationError, ValueError)):
        coupled_lyapunov_solve(np.array([[[-1.0]]]), gen, np.ones((2, 1, 1)))
