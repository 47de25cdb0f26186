import math

import numpy as np
import pytest
import scipy.linalg
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from oqho.errors import NotPositiveDefinite, NotStable, OddChannelCount
from oqho.system import (JBAR, THETA_CCR, build_model, canonicalize, commutator_kernel, kernel_C,
                         model_from_rates, pr_residual, rotation_U, sqrtm_spd_2x2, two_point_sigma)

from conftest import random_stable_model


def test_scalar_energy_gives_rotation_drift():
    model = build_model(2.0 * np.eye(2), np.eye(2))
    np.testing.assert_array_equal(model.A, [[-1.0, 2.0], [-2.0, -1.0]])
    assert model.mu == 1.0 and model.nu == 2.0
    assert model.theta_transient == 1.0


def test_zero_coupling_is_not_stable():
    with pytest.raises(NotStable):
        build_model(np.eye(2), np.zeros((2, 2)))
    model = build_model(np.eye(2), np.zeros((2, 2)), require_stable=False)
    assert model.mu == 0 and not model.stable


def test_eigenvalues_of_drift(skewed_model):
    ev = np.sort_complex(np.linalg.eigvals(skewed_model.A))
    mu, nu = skewed_model.mu, math.sqrt(1.75)
    assert skewed_model.nu == pytest.approx(nu, rel=1e-15)
    np.testing.assert_allclose(ev, [-mu - 1j * nu, -mu + 1j * nu], rtol=1e-12)


@pytest.mark.parametrize("R", [[[1.0, 2.0], [2.0, 1.0]], [[-1.0, 0.0], [0.0, 2.0]], [[1.0, 1.0], [1.0, 1.0]]])
def test_rejects_non_positive_definite(R):
    with pytest.raises(NotPositiveDefinite):
        build_model(R, np.eye(2))


def test_rejects_odd_channels():
    with pytest.raises(OddChannelCount):
        build_model(np.eye(2), np.ones((3, 2)))


def test_mjm_is_multiple_of_jbar(rng):
    for _ in range(20):
        model = random_stable_model(rng)
        MJM = model.M.T @ model.J @ model.M
        np.testing.assert_allclose(MJM, model.mu * JBAR, atol=1e-13)
        np.testing.assert_allclose(model.A, JBAR @ (model.R + MJM), atol=0)
        np.testing.assert_allclose(model.B, JBAR @ model.M.T, atol=0)


def test_canonicalize_scalar_is_identity():
    model = model_from_rates(0.7, 1.3)
    c = canonicalize(model)
    np.testing.assert_allclose(c.S, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(c.A_tilde, model.A, atol=1e-15)


def test_canonicalize_diagonal():
    c = canonicalize(build_model([[2.0, 0.0], [0.0, 0.5]], np.eye(2)))
    np.testing.assert_allclose(c.S, np.diag([math.sqrt(2), 1 / math.sqrt(2)]), atol=1e-15)
    assert np.linalg.det(c.S) == pytest.approx(1.0, abs=1e-15)


def test_canonicalize_similarity(skewed_model):
    c = canonicalize(skewed_model)
    SAS = c.S @ skewed_model.A @ np.linalg.inv(c.S)
    np.testing.assert_allclose(SAS, c.A_tilde, atol=1e-12)
    np.testing.assert_allclose(c.S, scipy.linalg.sqrtm(skewed_model.R / skewed_model.nu).real, atol=1e-14)


def test_sqrtm_matches_scipy(rng):
    for _ in range(50):
        L = rng.normal(size=(2, 2))
        R = L @ L.T + 0.1 * np.eye(2)
        np.testing.assert_allclose(sqrtm_spd_2x2(R), scipy.linalg.sqrtm(R).real, atol=1e-12)


def test_canonical_invariants_random(rng):
    for _ in range(200):
        model = random_stable_model(rng)
        c = canonicalize(model)
        assert abs(np.linalg.det(c.S) - 1.0) <= 1e-12
        np.testing.assert_allclose(c.S @ model.A @ np.linalg.inv(c.S), c.A_tilde,
                                   atol=1e-10 * max(1.0, np.abs(model.A).max()))
        ev = np.sort_complex(np.linalg.eigvals(model.A))
        ref = np.array([-model.mu - 1j * model.nu, -model.mu + 1j * model.nu])
        assert np.abs(ev - ref).max() <= 1e-10 * abs(ref[0])


def test_pr_residual_vanishes_and_detects_perturbation(skewed_model):
    assert np.abs(pr_residual(skewed_model)).max() <= 1e-13
    B = np.array(skewed_model.B)
    B[0, 1] += 0.1
    broken = replace(skewed_model, B=B)
    assert np.abs(pr_residual(broken)).max() > 1e-3


def test_pr_residual_unit_instance():
    # R = I, M = I: A = Jb - I, B = Jb, J = Jb; A Theta + Theta A^T = -Jb, B J B^T = Jb
    model = build_model(np.eye(2), np.eye(2))
    res = pr_residual(model)
    np.testing.assert_array_equal(res, np.zeros((2, 2)))


def test_pr_residual_on_unstable_model():
    model = build_model(np.eye(2), np.zeros((2, 2)), require_stable=False)
    np.testing.assert_array_equal(pr_residual(model), np.zeros((2, 2)))
    with pytest.raises(NotStable):
        canonicalize(model)


def test_kernel_C():
    assert kernel_C(1.0, 0.0) == 1.0
    assert kernel_C(1.0, -2.0) == kernel_C(1.0, 2.0)
    assert kernel_C(2.0, 0.5) == pytest.approx(math.exp(-1.0), rel=1e-16)


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.1, 5))
@settings(max_examples=200, deadline=None)
def test_rotation_group(a, b, nu):
    Ua, Ub = rotation_U(nu, a), rotation_U(nu, b)
    np.testing.assert_allclose(Ua @ Ub, rotation_U(nu, a + b), atol=1e-12)
    np.testing.assert_allclose(Ua @ Ua.T, np.eye(2), atol=1e-13)


def test_rotation_basics():
    np.testing.assert_array_equal(rotation_U(3.0, 0.0), np.eye(2))
    np.testing.assert_allclose(rotation_U(2.0, 0.37).T, rotation_U(2.0, -0.37), atol=1e-16)
    np.testing.assert_allclose(rotation_U(1.5, 0.2), scipy.linalg.expm(0.2 * 1.5 * JBAR), atol=1e-15)


def test_commutator_kernel_identities(skewed_model):
    c = canonicalize(skewed_model)
    np.testing.assert_allclose(commutator_kernel(c, 0.0), THETA_CCR, atol=0)
    np.testing.assert_allclose(commutator_kernel(c, -1.3), -commutator_kernel(c, 1.3).T, atol=1e-16)


def test_commutator_kernel_matches_matrix_exponential(skewed_model):
    c = canonicalize(skewed_model)
    A = c.A_tilde
    for tau in np.linspace(-5 / c.mu, 5 / c.mu, 100):
        ref = 0.5 * (scipy.linalg.expm(tau * A) @ JBAR if tau >= 0 else JBAR @ scipy.linalg.expm(-tau * A.T))
        np.testing.assert_allclose(commutator_kernel(c, tau), ref, atol=1e-12)


def test_commutator_kernel_unit_rates():
    c = canonicalize(model_from_rates(1.0, 1.0))
    ref = 0.5 * math.exp(-1.0) * rotation_U(1.0, 1.0) @ JBAR
    np.testing.assert_allclose(commutator_kernel(c, 1.0), ref, atol=1e-16)
    np.testing.assert_allclose(commutator_kernel(c, 1.0), 0.5 * scipy.linalg.expm(c.A_tilde) @ JBAR, atol=1e-15)


def test_two_point_sigma(skewed_model):
    c = canonicalize(skewed_model)
    P = np.array([[1.2, 0.3], [0.3, 0.7]])
    np.testing.assert_array_equal(two_point_sigma(P, c, 0.0), P)
    np.testing.assert_allclose(two_point_sigma(P, c, -0.8), two_point_sigma(P, c, 0.8).T, atol=1e-16)
    tau = 0.6
    np.testing.assert_allclose(two_point_sigma(np.eye(2), c, tau),
                               kernel_C(c.mu, tau) * rotation_U(c.nu, tau), atol=1e-16)
    np.testing.assert_allclose(two_point_sigma(P, c, tau), scipy.linalg.expm(tau * c.A_tilde) @ P, atol=1e-14)
