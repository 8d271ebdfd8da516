import numpy as np
import pytest
from hypothesis import given, strategies as st

from pint4th.circulant import (
    build_circulants, dft_matrix, diagonalize, eigenvector_matrix, gamma_scaling,
    step1_transform, step3_transform,
)


def test_build_examples():
    ac = build_circulants(2, 0.5, 1.0, 1.0)
    np.testing.assert_allclose(ac.dense(1), [[1, -0.5], [-1, 1]])
    np.testing.assert_allclose(ac.dense(2), np.eye(2))
    np.testing.assert_allclose(build_circulants(3, 0.5, 0.1, 1.0).dense(1),
                               [[10, 0, -5], [-10, 10, 0], [0, -10, 10]])
    np.testing.assert_allclose(build_circulants(2, 0.5, 1.0, 0.5).dense(2),
                               [[0.5, 0.25], [0.5, 0.5]])


@pytest.mark.parametrize("args", [(1, 0.5, 1.0, 1.0), (4, 0.0, 1.0, 1.0), (4, 1.0, 1.0, 1.0),
                                  (4, 0.5, 0.0, 1.0), (4, 0.5, 1.0, 1.5)])
def test_build_rejects(args):
    with pytest.raises(ValueError):
        build_circulants(*args)


def test_small_alpha_warns():
    with pytest.warns(UserWarning):
        build_circulants(4, 1e-5, 1.0, 1.0)


def test_eigenvalue_examples():
    d = diagonalize(build_circulants(2, 0.25, 1.0, 1.0))
    np.testing.assert_allclose(np.sort(d.eigs_c1.real), [0.5, 1.5], atol=1e-14)
    np.testing.assert_allclose(d.eigs_c1.imag, 0.0, atol=1e-14)
    np.testing.assert_allclose(d.eigs_c2, [1, 1], atol=1e-14)
    d0 = diagonalize(build_circulants(5, 0.3, 0.1, 0.0))
    np.testing.assert_allclose(d0.eigs_c2, d0.eigs_c3, atol=1e-14)


def test_closed_form_eigenvalues_up_to_order():
    n, alpha, dt = 6, 0.01, 0.1
    d = diagonalize(build_circulants(n, alpha, dt, 1.0))
    closed = (1 - alpha ** (1 / n) * np.exp(-2j * np.pi * np.arange(n) / n)) / dt
    key = lambda z: (round(z.real, 9), round(z.imag, 9))
    assert sorted(map(key, d.eigs_c1)) == sorted(map(key, closed))


@pytest.mark.parametrize("n_t", [2, 4, 8, 16, 64])
@pytest.mark.parametrize("alpha", [1e-3, 1e-2, 0.5])
@pytest.mark.parametrize("theta", [1.0, 0.5])
def test_reconstruction(n_t, alpha, theta):
    ac = build_circulants(n_t, alpha, 0.01, theta)
    d = diagonalize(ac)
    V = eigenvector_matrix(d.gamma)
    Vinv = np.linalg.inv(V)
    for j, eigs in ((1, d.eigs_c1), (2, d.eigs_c2), (3, d.eigs_c3)):
        C = ac.dense(j)
        err = np.linalg.norm(V @ np.diag(eigs) @ Vinv - C) / np.linalg.norm(C)
        assert err <= 1e-10


@pytest.mark.parametrize("n_t", [2, 5, 8])
def test_pairing_identities(n_t):
    ac = build_circulants(n_t, 0.02, 0.3, 0.5)
    d = diagonalize(ac)
    np.testing.assert_allclose(d.eigs_c1 * ac.dt + d.eigs_c3, 1.0, atol=1e-12)
    np.testing.assert_allclose(d.eigs_c2, ac.theta + (1 - ac.theta) * d.eigs_c3, atol=1e-12)


@pytest.mark.parametrize("n_t", [3, 7, 12])
def test_fft_matches_dense_dft(n_t, rng):
    ac = build_circulants(n_t, 0.05, 0.1, 0.5)
    a, b = diagonalize(ac, "fft"), diagonalize(ac, "dense")
    np.testing.assert_allclose(a.eigs_c1, b.eigs_c1, atol=1e-12 * np.abs(a.eigs_c1).max())
    x = rng.standard_normal((n_t, 4))
    np.testing.assert_allclose(step1_transform(x, a.gamma, "fft"),
                               step1_transform(x, a.gamma, "dense"), atol=1e-12)


def test_step1_and_step3_examples():
    n, v = 4, np.array([1.0, -2.0, 3.0])
    gamma = gamma_scaling(n, 0.1)
    b = np.zeros((n, 3))
    b[0] = v
    np.testing.assert_allclose(step1_transform(b, gamma), np.tile(v / 2.0, (n, 1)), atol=1e-15)
    s = np.tile(v, (n, 1))
    expected = np.zeros((n, 3))
    expected[0] = 2.0 * v
    np.testing.assert_allclose(step3_transform(s, gamma), expected, atol=1e-14)
    one = np.array([[1.0, 2.0]])
    np.testing.assert_allclose(step1_transform(one, np.ones(1)), one)
    np.testing.assert_allclose(step3_transform(one, np.ones(1)), one)
    with pytest.raises(ValueError):
        step1_transform(np.zeros((3, 2)), gamma)


def test_dft_matrix_unitary():
    F = dft_matrix(6)
    np.testing.assert_allclose(F @ F.conj().T, np.eye(6), atol=1e-14)


@given(n_t=st.integers(2, 32), alpha=st.floats(1e-3, 0.9), seed=st.integers(0, 2**16))
def test_round_trip_property(n_t, alpha, seed):
    gamma = gamma_scaling(n_t, alpha)
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((n_t, 5)) + 1j * rng.standard_normal((n_t, 5))
    np.testing.assert_allclose(step3_transform(step1_transform(b, gamma), gamma), b, atol=1e-12)
