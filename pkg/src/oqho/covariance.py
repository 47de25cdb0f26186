"""Invariant covariance and second-order statistics of the expansion coefficients.

Under vacuum input fields the canonical variables have the invariant one-point
covariance ``P + (i/2) Jb``, where ``P`` solves ``A P + P A^T + B B^T = 0``.
The coefficient pairs ``zeta_k`` of the expansion then have real covariance
blocks

    P_jk = (lambda_j lambda_k)^(-1/2) int int f_j(s) f_k(t) C(s - t)
           U(min(s, t))^T P U(min(s, t)) ds dt

and the stacked vector ``Z_N`` has quantum covariance
``K_N = P_N + (i/2) I_N (x) Jb``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigenbasis import SpectralBasis, eigenfunctions
from .errors import AdmissibilityViolation, IndexOutOfRange, NotStable, NotSymmetric, QuadratureBudgetExceeded
from .quadrature import QuadratureConfig, composite_rule
from .system import JBAR, SIGMA1, SIGMA3, CanonicalModel, rotation_U

ADMISSIBILITY_FLOOR = -1e-9
_CHUNK = 256


@dataclass(frozen=True)
class PauliCoefficients:
    """Coordinates of a real symmetric 2x2 matrix over ``I_2, sigma_1, sigma_3``."""

    b0: float
    b1: float
    b3: float

    def reconstruct(self) -> np.ndarray:
        return self.b0 * np.eye(2) + self.b1 * SIGMA1 + self.b3 * SIGMA3


def pauli_decompose(Msym) -> PauliCoefficients:
    Msym = np.asarray(Msym, dtype=float)
    if Msym.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {Msym.shape}")
    if abs(Msym[0, 1] - Msym[1, 0]) > 1e-14 * max(1.0, np.abs(Msym).max()):
        raise NotSymmetric("matrix is not symmetric")
    m11, m22 = Msym[0, 0], Msym[1, 1]
    return PauliCoefficients(b0=0.5 * (m11 + m22), b1=0.5 * (Msym[0, 1] + Msym[1, 0]), b3=0.5 * (m11 - m22))


def solve_lyapunov(model: CanonicalModel) -> np.ndarray:
    """Closed-form invariant covariance of the canonical variables."""
    mu, nu = model.mu, model.nu
    if not mu > 0:
        raise NotStable(f"mu={mu!r} must be positive")
    BB = np.asarray(model.B_tilde) @ np.asarray(model.B_tilde).T
    b = pauli_decompose(0.5 * (BB + BB.T))
    d = mu * mu + nu * nu
    P = 0.5 * (b.b0 / mu * np.eye(2)
               + ((mu * b.b1 - nu * b.b3) * SIGMA1 + (nu * b.b1 + mu * b.b3) * SIGMA3) / d)
    return P


def lyapunov_residual(model: CanonicalModel, P) -> np.ndarray:
    """``-2 mu P + nu [Jb, P] + B B^T`` for the canonical model."""
    P = np.asarray(P, dtype=float)
    B = np.asarray(model.B_tilde)
    return -2.0 * model.mu * P + model.nu * (JBAR @ P - P @ JBAR) + B @ B.T


def controllability_gramian(A, B, *, epsabs: float = 1e-13) -> np.ndarray:
    """``int_0^inf exp(tA) B B^T exp(tA^T) dt`` by adaptive quadrature.

    Independent of the closed form above: uses a general matrix exponential.
    """
    from scipy.integrate import quad_vec
    from scipy.linalg import expm

    A = np.asarray(A, dtype=float)
    BB = np.asarray(B, dtype=float) @ np.asarray(B, dtype=float).T

    def integrand(t):
        E = expm(t * A)
        return E @ BB @ E.T

    val, _ = quad_vec(integrand, 0.0, np.inf, epsabs=epsabs, epsrel=1e-13, limit=2000)
    return val


def _rotated_P(P: np.ndarray, nu: float, t: np.ndarray) -> np.ndarray:
    U = rotation_U(nu, t)
    M = np.swapaxes(U, -1, -2) @ P @ U
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def _tail_integrals(basis: SpectralBasis, t: np.ndarray, quad: QuadratureConfig) -> np.ndarray:
    """``H[k, i] = int_{t_i}^T f_k(s) exp(-mu (s - t_i)) ds``."""
    omega = float(basis.omegas[-1])
    panels = quad.panel_count(omega, basis.T)
    H = np.empty((basis.count, t.size))
    for lo in range(0, t.size, _CHUNK):
        tc = t[lo:lo + _CHUNK]
        s, w = composite_rule(tc, basis.T, panels, quad.nodes_per_panel)
        kern = w * np.exp(-basis.mu * (s - tc[:, None]))
        F = eigenfunctions(basis, s)
        H[:, lo:lo + _CHUNK] = np.sum(F * kern, axis=-1)
    return H


def cross_covariance_blocks(basis: SpectralBasis, P, nu: float,
                            quad: QuadratureConfig | None = None) -> np.ndarray:
    """All blocks ``P_jk`` for ``j, k <= basis.count`` as an (N, N, 2, 2) array.

    The double integral is split along the diagonal ``s = t``; on each
    triangle the inner integral runs over the smooth exponential tail and the
    outer integral carries the rotated covariance ``U(t)^T P U(t)``.
    """
    quad = quad or QuadratureConfig()
    P = np.asarray(P, dtype=float)
    if not np.allclose(P, P.T, rtol=0, atol=1e-14 * max(1.0, np.abs(P).max())):
        raise NotSymmetric("P must be symmetric")
    N = basis.count
    omega_max = 2.0 * float(basis.omegas[-1]) + 2.0 * abs(nu)
    panels = quad.panel_count(omega_max, basis.T)
    n_outer = panels * quad.nodes_per_panel
    n_inner = quad.panel_count(float(basis.omegas[-1]), basis.T) * quad.nodes_per_panel
    if n_outer > quad.max_nodes or n_inner > quad.max_nodes:
        raise QuadratureBudgetExceeded(
            f"{n_outer} outer / {n_inner} inner nodes exceed the budget of {quad.max_nodes}")
    t, w = composite_rule(0.0, basis.T, panels, quad.nodes_per_panel)
    F = eigenfunctions(basis, t)
    H = _tail_integrals(basis, t, quad)
    Mw = (_rotated_P(P, nu, t) * w[:, None, None]).reshape(-1, 4)
    scale = 1.0 / np.sqrt(basis.lambdas)

    blocks = np.empty((N, N, 2, 2))
    for j in range(N):
        # only j <= k is integrated; the lower triangle is the transpose
        X = F[j:] * H[j] + F[j] * H[j:]
        vals = (X @ Mw).reshape(-1, 2, 2) * (scale[j] * scale[j:])[:, None, None]
        vals = 0.5 * (vals + np.swapaxes(vals, -1, -2))
        blocks[j, j:] = vals
        blocks[j:, j] = np.swapaxes(vals, -1, -2)
    return blocks


def qkl_cross_covariance(basis: SpectralBasis, P, model: CanonicalModel, j: int, k: int,
                         quad: QuadratureConfig | None = None) -> np.ndarray:
    """Single block ``P_jk`` (1-based indices)."""
    N = basis.count
    if not (1 <= j <= N and 1 <= k <= N):
        raise IndexOutOfRange(f"(j, k) = ({j}, {k}) outside 1..{N}")
    if not model.mu > 0:
        raise NotStable(f"mu={model.mu!r} must be positive")
    n = max(j, k)
    blocks = cross_covariance_blocks(basis.truncate(n), P, model.nu, quad)
    return blocks[j - 1, k - 1]


def assemble_P_N(blocks) -> np.ndarray:
    """Arrange an (N, N, 2, 2) block grid into the 2N x 2N matrix ``P_N``."""
    blocks = np.asarray(blocks, dtype=float)
    N = blocks.shape[0]
    return blocks.transpose(0, 2, 1, 3).reshape(2 * N, 2 * N)


def quantum_covariance(P_N) -> np.ndarray:
    """``K_N = P_N + (i/2) I_N (x) Jb``."""
    P_N = np.asarray(P_N, dtype=float)
    N = P_N.shape[0] // 2
    return P_N + 0.5j * np.kron(np.eye(N), JBAR)


def admissibility_margin(P_N) -> float:
    """Smallest eigenvalue of the Hermitian matrix ``K_N``."""
    return float(np.linalg.eigvalsh(quantum_covariance(P_N))[0])


@dataclass(frozen=True)
class CovarianceSet:
    P: np.ndarray
    blocks: np.ndarray
    P_N: np.ndarray
    quad: QuadratureConfig
    min_eig: float

    @property
    def N(self) -> int:
        return self.blocks.shape[0]

    @property
    def K_N(self) -> np.ndarray:
        return quantum_covariance(self.P_N)

    def truncate(self, N: int) -> "CovarianceSet":
        blocks = self.blocks[:N, :N]
        P_N = assemble_P_N(blocks)
        return CovarianceSet(self.P, blocks, P_N, self.quad, admissibility_margin(P_N))


def covariance_set(basis: SpectralBasis, model: CanonicalModel, P=None,
                   quad: QuadratureConfig | None = None, check: bool = True) -> CovarianceSet:
    """Compute ``P`` (unless given), all blocks, and the assembled ``P_N``."""
    quad = quad or QuadratureConfig()
    if P is None:
        P = solve_lyapunov(model)
    P = np.asarray(P, dtype=float)
    blocks = cross_covariance_blocks(basis, P, model.nu, quad)
    P_N = assemble_P_N(blocks)
    margin = admissibility_margin(P_N)
    if check and margin < ADMISSIBILITY_FLOOR:
        raise AdmissibilityViolation(
            f"K_N has eigenvalue {margin:.3e} below {ADMISSIBILITY_FLOOR:g}; quadrature too coarse?")
    for arr in (P, blocks, P_N):
        arr.setflags(write=False)
    return CovarianceSet(P=P, blocks=blocks, P_N=P_N, quad=quad, min_eig=margin)


def reconstruct_real_covariance(basis: SpectralBasis, blocks, nu: float, s: float, t: float,
                                N: int | None = None) -> np.ndarray:
    """Real part of ``E X(s) X(t)^T`` rebuilt from the first ``N`` coefficient pairs."""
    N = basis.count if N is None else N
    if N == 0:
        return np.zeros((2, 2))
    sub = basis.truncate(N)
    blocks = np.asarray(blocks)[:N, :N]
    a = np.sqrt(sub.lambdas) * eigenfunctions(sub, s)
    b = np.sqrt(sub.lambdas) * eigenfunctions(sub, t)
    inner = np.einsum("j,k,jkab->ab", a, b, blocks)
    return rotation_U(nu, s) @ inner @ rotation_U(nu, t).T
