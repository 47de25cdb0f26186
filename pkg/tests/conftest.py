import math

import numpy as np
import pytest

from oqho.system import build_model

ACCEPTANCE_LINES = []


def random_stable_model(rng, m=None):
    """Random model with R > 0 and mu > 0 (columns of M swapped to fix the sign)."""
    while True:
        L = rng.normal(size=(2, 2))
        R = L @ L.T + 0.2 * np.eye(2)
        mm = m or int(rng.choice([2, 4, 6]))
        M = rng.normal(size=(mm, 2))
        model = build_model(R, M, require_stable=False)
        if abs(model.mu) < 0.05:
            continue
        if model.mu < 0:
            M = M[:, ::-1]
        return build_model(R, M)


def gaussian_fock_state(H, dim=160):
    """Density matrix proportional to exp(-z^T H z / 2), z = (q, p), in a truncated Fock space.

    Returns ``(rho, q, p)`` with ``[q, p] = i`` on the retained levels.
    """
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    q = (a + a.T) / math.sqrt(2)
    p = (a - a.T) / (1j * math.sqrt(2))
    z = [q, p]
    G = 0.5 * sum(H[i, j] * z[i] @ z[j] for i in range(2) for j in range(2))
    e, V = np.linalg.eigh(0.5 * (G + G.conj().T))
    rho = (V * np.exp(-(e - e[0]))) @ V.conj().T
    return rho / np.trace(rho).real, q, p


def fock_covariance(rho, q, p):
    z = [q, p]
    return np.array([[np.trace(rho @ (z[i] @ z[j] + z[j] @ z[i]) / 2).real for j in range(2)] for i in range(2)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def skewed_model():
    """Non-scalar energy matrix, four channels; used wherever P must not be a multiple of I."""
    R = np.array([[2.0, 0.5], [0.5, 1.0]])
    M = np.array([[0.3, 1.1], [0.9, -0.2], [-0.5, 0.4], [0.7, 0.8]])
    return build_model(R, M)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
