import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from conftest import random_stable_model
from oqho.covariance import (admissibility_margin, assemble_P_N, controllability_gramian, covariance_set,
                             cross_covariance_blocks, lyapunov_residual, pauli_decompose, qkl_cross_covariance,
                             quantum_covariance, reconstruct_real_covariance, solve_lyapunov)
from oqho.eigenbasis import solve_roots
from oqho.errors import AdmissibilityViolation, IndexOutOfRange, NotStable, NotSymmetric, QuadratureBudgetExceeded
from oqho.quadrature import QuadratureConfig
from oqho.system import SIGMA1, SIGMA3, CanonicalModel, canonicalize, model_from_rates, two_point_sigma


def canonical_with_noise(mu, nu, B):
    A = np.array([[-mu, nu], [-nu, -mu]])
    return CanonicalModel(S=np.eye(2), A_tilde=A, B_tilde=np.asarray(B, dtype=float), mu=mu, nu=nu)


@pytest.mark.parametrize("M,expected", [
    (np.eye(2), (1, 0, 0)),
    (SIGMA1, (0, 1, 0)),
    (np.array([[3.0, 1.0], [1.0, -1.0]]), (1, 1, 2)),
])
def test_pauli_examples(M, expected):
    c = pauli_decompose(M)
    assert (c.b0, c.b1, c.b3) == expected
    assert np.array_equal(c.reconstruct(), M)


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
def test_pauli_roundtrip(v):
    M = np.array([[v[0], v[1]], [v[1], v[2]]])
    np.testing.assert_allclose(pauli_decompose(M).reconstruct(), M, rtol=0, atol=1e-12 * (1 + np.abs(M).max()))


def test_pauli_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        pauli_decompose(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_lyapunov_scalar_noise_gives_identity():
    mu, nu = 0.7, 1.9
    P = solve_lyapunov(canonical_with_noise(mu, nu, np.sqrt(2 * mu) * np.eye(2)))
    np.testing.assert_allclose(P, np.eye(2), atol=1e-15)


def test_lyapunov_off_diagonal_noise():
    mu, nu = 0.7, 1.9
    BB = 2 * mu * SIGMA1 + 2 * mu * np.eye(2)
    B = np.sqrt(2 * mu) * np.array([[1.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(B @ B.T, BB)
    canon = canonical_with_noise(mu, nu, B)
    P = solve_lyapunov(canon)
    expected = np.eye(2) + mu / (mu ** 2 + nu ** 2) * (mu * SIGMA1 + nu * SIGMA3)
    np.testing.assert_allclose(P, expected, atol=1e-12)
    assert np.abs(lyapunov_residual(canon, P)).max() < 1e-12


def test_lyapunov_matches_scipy_and_gramian(skewed_model):
    canon = canonicalize(skewed_model)
    P = solve_lyapunov(canon)
    ref = scipy.linalg.solve_continuous_lyapunov(canon.A_tilde, -canon.B_tilde @ canon.B_tilde.T)
    np.testing.assert_allclose(P, ref, atol=1e-12)
    G = controllability_gramian(canon.A_tilde, canon.B_tilde)
    np.testing.assert_allclose(P, G, atol=1e-8)


def test_lyapunov_residual_random_models(rng):
    worst = 0.0
    for _ in range(100):
        canon = canonicalize(random_stable_model(rng))
        P = solve_lyapunov(canon)
        assert np.array_equal(P, P.T)
        scale = max(1.0, np.abs(canon.B_tilde @ canon.B_tilde.T).max())
        worst = max(worst, np.abs(lyapunov_residual(canon, P)).max() / scale)
    assert worst <= 1e-13


def test_lyapunov_rejects_unstable():
    with pytest.raises(NotStable):
        solve_lyapunov(canonical_with_noise(-0.1, 1.0, np.eye(2)))


@pytest.fixture(scope="module")
def unit_basis():
    return solve_roots(1.0, 1.0, 10)


def test_identity_blocks(unit_basis):
    blocks = cross_covariance_blocks(unit_basis, np.eye(2), 1.0)
    target = np.einsum("jk,ab->jkab", np.eye(10), np.eye(2))
    assert np.abs(blocks - target).max() <= 1e-7
    P_N = assemble_P_N(blocks)
    np.testing.assert_allclose(P_N, np.eye(20), atol=1e-7)
    eig = np.linalg.eigvalsh(quantum_covariance(P_N))
    np.testing.assert_allclose(np.sort(eig), np.repeat([0.5, 1.5], 10), atol=1e-7)


def test_block_transpose_symmetry(unit_basis, skewed_model):
    canon = canonicalize(model_from_rates(1.0, 1.0))
    P = np.array([[1.3, 0.4], [0.4, 0.8]])
    b12 = qkl_cross_covariance(unit_basis, P, canon, 1, 2)
    b21 = qkl_cross_covariance(unit_basis, P, canon, 2, 1)
    np.testing.assert_allclose(b12, b21.T, atol=1e-8)
    blocks = cross_covariance_blocks(unit_basis, P, 1.0)
    P_N = assemble_P_N(blocks)
    assert np.array_equal(P_N, P_N.T)
    np.testing.assert_allclose(blocks[0, 1], b12, atol=1e-12)


def test_single_block_errors(unit_basis):
    canon = canonicalize(model_from_rates(1.0, 1.0))
    with pytest.raises(IndexOutOfRange):
        qkl_cross_covariance(unit_basis, np.eye(2), canon, 0, 1)
    with pytest.raises(IndexOutOfRange):
        qkl_cross_covariance(unit_basis, np.eye(2), canon, 1, 11)


def test_assemble_single_block():
    b = np.array([[[[2.0, 0.3], [0.3, 1.0]]]])
    assert np.array_equal(assemble_P_N(b), b[0, 0])


def test_assembly_layout():
    rng = np.random.default_rng(3)
    blocks = rng.normal(size=(3, 3, 2, 2))
    P_N = assemble_P_N(blocks)
    for j in range(3):
        for k in range(3):
            assert np.array_equal(P_N[2 * j:2 * j + 2, 2 * k:2 * k + 2], blocks[j, k])


def test_budget_exceeded(unit_basis):
    with pytest.raises(QuadratureBudgetExceeded):
        cross_covariance_blocks(unit_basis, np.eye(2), 1.0, QuadratureConfig(max_nodes=100))


def test_covariance_set_admissible(skewed_model):
    canon = canonicalize(skewed_model)
    cs = covariance_set(solve_roots(canon.mu, 2.0, 8), canon)
    assert cs.N == 8
    assert cs.min_eig >= -1e-9
    assert cs.truncate(3).P_N.shape == (6, 6)
    np.testing.assert_array_equal(cs.truncate(3).P_N, cs.P_N[:6, :6])
    with pytest.raises(ValueError):
        cs.P_N[0, 0] = 1.0


def test_admissibility_violation_detected(unit_basis):
    canon = canonicalize(model_from_rates(1.0, 1.0))
    # P = I/4 violates the uncertainty relation, so K_N cannot be positive
    with pytest.raises(AdmissibilityViolation):
        covariance_set(unit_basis, canon, P=0.25 * np.eye(2))
    assert admissibility_margin(0.25 * np.eye(2)) == pytest.approx(-0.25)


def _l2_reconstruction_error(basis, blocks, canon, P, N):
    grid = np.linspace(0, basis.T, 41)
    err = np.empty((41, 41))
    for i, s in enumerate(grid):
        for j, t in enumerate(grid):
            D = reconstruct_real_covariance(basis, blocks, canon.nu, s, t, N) - two_point_sigma(P, canon, s - t)
            err[i, j] = np.sum(D * D)
    h = grid[1] - grid[0]
    w = np.full(41, h)
    w[[0, -1]] *= 0.5
    return float(np.sqrt(w @ err @ w))


def test_reconstruction_converges(skewed_model):
    canon = canonicalize(skewed_model)
    basis = solve_roots(canon.mu, 1.0, 16)
    P = solve_lyapunov(canon)
    blocks = cross_covariance_blocks(basis, P, canon.nu)
    errs = [_l2_reconstruction_error(basis, blocks, canon, P, N) for N in (4, 8, 16)]
    assert errs[0] > errs[1] > errs[2]
    assert np.array_equal(reconstruct_real_covariance(basis, blocks, canon.nu, 0.2, 0.3, 0), np.zeros((2, 2)))


def test_reconstruction_identity_midpoint():
    canon = canonicalize(model_from_rates(1.0, 1.0))
    basis = solve_roots(1.0, 1.0, 24)
    blocks = cross_covariance_blocks(basis, np.eye(2), canon.nu)
    R = reconstruct_real_covariance(basis, blocks, canon.nu, 0.5, 0.5)
    # the pointwise Mercer tail at the midpoint is bounded by the total trace deficit
    deficit = 1.0 - np.sum(basis.lambdas)
    assert np.abs(R - np.eye(2)).max() <= 2 * deficit + 1e-7
    assert np.abs(R - R.T).max() < 1e-12
