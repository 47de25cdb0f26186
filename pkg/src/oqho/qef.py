"""Truncated quadratic-exponential functional for a scalar weighting matrix.

With ``Q_N = sum_k lambda_k zeta_k^T zeta_k`` and the coefficient covariance
``K_N = P_N + (i/2) I_N (x) Jb``, the functional ``Xi_N = E exp(theta Q_N)`` is

    Xi_N = det(Gamma_N)^(-1/2),
    Gamma_N = I_3N - (Phi_N P_N Phi_N^T + (i/2) I_N (x) Ups) Psi_N,

valid while ``r_N = rho(P_N diag(2 alpha_k, beta_k)) < 1`` where
``alpha_k = tanh(theta lambda_k)`` and ``beta_k = sinh(2 theta lambda_k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .eigenbasis import SpectralBasis, basis_rule, eigenfunctions
from .errors import (BracketInvalid, ConvergenceFailure, NotConverged, NotPSD, RadiusExceeded,
                     SingularGamma)
from .quadrature import QuadratureConfig
from .system import rotation_U

UPSILON = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, -1.0], [0.0, -1.0, 0.0]])
PHI_BLOCK = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
RADIUS_MARGIN = 1e-12
PHASE_TOL = 1e-9


def exponential_params(theta, lam):
    """Return ``(tanh(theta lam), sinh(2 theta lam))``; broadcasts."""
    x = np.multiply(theta, lam)
    return np.tanh(x), np.sinh(2.0 * x)


def build_structural_matrices(N: int, alphas, betas):
    """``Phi_N`` (3N x 2N), diagonal ``Psi_N`` (3N x 3N) and the 3x3 block ``Ups``."""
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if alphas.shape != (N,) or betas.shape != (N,):
        raise ValueError(f"alphas and betas must have length N={N}")
    Phi = np.kron(np.eye(N), PHI_BLOCK)
    Psi = np.diag(np.column_stack([alphas, betas, alphas]).ravel())
    return Phi, Psi, UPSILON.copy()


def diamond_map(D) -> np.ndarray:
    """Symmetric matrix inheriting the upper triangle (with diagonal) of ``D``."""
    D = np.asarray(D)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("diamond_map expects a square matrix")
    upper = np.triu(D)
    return upper + np.triu(D, 1).T


def _radius_weights(theta: float, lambdas) -> np.ndarray:
    a, b = exponential_params(theta, np.asarray(lambdas, dtype=float))
    return np.column_stack([2.0 * a, b]).ravel()


def admissibility_radius(theta: float, lambdas, P_N) -> float:
    """Spectral radius of ``P_N diag_k(2 alpha_k, beta_k)``."""
    P_N = np.asarray(P_N, dtype=float)
    N = P_N.shape[0] // 2
    d = _radius_weights(theta, np.asarray(lambdas)[:N])
    if not np.any(d):
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(P_N * d[None, :]))))


def gamma_matrix(theta: float, lambdas, P_N) -> np.ndarray:
    P_N = np.asarray(P_N, dtype=float)
    N = P_N.shape[0] // 2
    alphas, betas = exponential_params(theta, np.asarray(lambdas, dtype=float)[:N])
    Phi, Psi, Ups = build_structural_matrices(N, alphas, betas)
    inner = Phi @ P_N @ Phi.T + 0.5j * np.kron(np.eye(N), Ups)
    return np.eye(3 * N) - inner * np.diag(Psi)[None, :]


def log_det(M) -> complex:
    """Complex logarithm of ``det M`` from a partially pivoted LU factorization.

    Magnitudes and phases of the pivots are accumulated separately so that
    large matrices neither overflow nor underflow.  The imaginary part is
    the accumulated phase (not reduced modulo 2 pi).
    """
    M = np.asarray(M)
    if M.size == 0:
        return 0j
    lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    d = np.diag(lu)
    if np.any(d == 0):
        raise SingularGamma("exactly zero pivot in LU factorization")
    swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
    log_abs = float(np.sum(np.log(np.abs(d))))
    phase = float(np.sum(np.angle(d))) + math.pi * (swaps % 2)
    phase = math.remainder(phase, 2.0 * math.pi)
    return complex(log_abs, phase)


def schur_increments(Gamma) -> tuple[complex, list[complex]]:
    """``ln det`` of the leading 3x3 block and of each successive Schur complement.

    The ``n``-th entry of the list is ``ln det Gamma_{n+1|n}``, the Schur
    complement of the leading ``3n x 3n`` block in the leading
    ``3(n+1) x 3(n+1)`` block of ``Gamma``.
    """
    Gamma = np.asarray(Gamma)
    N = Gamma.shape[0] // 3
    first = log_det(Gamma[:3, :3])
    incs = []
    for n in range(1, N):
        m = 3 * n
        lead = Gamma[:m, :m]
        Bc = Gamma[:m, m:m + 3]
        Cr = Gamma[m:m + 3, :m]
        D = Gamma[m:m + 3, m:m + 3]
        lu = scipy.linalg.lu_factor(lead)
        S = D - Cr @ scipy.linalg.lu_solve(lu, Bc)
        incs.append(log_det(S))
    return first, incs


@dataclass(frozen=True)
class QefEvaluation:
    theta: float
    N: int
    alphas: np.ndarray
    betas: np.ndarray
    Gamma_N: np.ndarray
    r_N: float
    log_det_gamma: complex
    log_Xi_N: float
    log_det_gamma1: complex = 0j
    schur_increments: list = field(default_factory=list)

    @property
    def Xi_N(self) -> float:
        return math.exp(self.log_Xi_N)

    @property
    def phase(self) -> float:
        return self.log_det_gamma.imag


def mean_square(lambdas, P_N) -> float:
    """``E Q_N = sum_k lambda_k tr(P_kk)``: the slope of ``ln Xi_N`` at zero."""
    P_N = np.asarray(P_N, dtype=float)
    N = P_N.shape[0] // 2
    lam = np.asarray(lambdas, dtype=float)[:N]
    diag = np.diag(P_N).reshape(N, 2).sum(axis=1)
    return float(np.dot(lam, diag))


def qef_truncated(theta: float, lambdas, P_N, *, with_increments: bool = False) -> QefEvaluation:
    """Evaluate ``ln Xi_N`` for risk sensitivity ``theta >= 0``.

    Raises :class:`RadiusExceeded` when ``r_N >= 1 - 1e-12``.
    """
    if not (theta >= 0 and math.isfinite(theta)):
        raise ValueError(f"theta={theta!r} must be finite and non-negative")
    P_N = np.asarray(P_N, dtype=float)
    N = P_N.shape[0] // 2
    lam = np.asarray(lambdas, dtype=float)[:N]
    alphas, betas = exponential_params(theta, lam)
    r = admissibility_radius(theta, lam, P_N)
    if r >= 1.0 - RADIUS_MARGIN:
        raise RadiusExceeded(f"r_N = {r:.15g} >= 1 at theta = {theta!r}", radius=r)
    Gamma = gamma_matrix(theta, lam, P_N)
    if theta == 0:
        ld = 0j
    else:
        ld = log_det(Gamma)
    first, incs = (0j, [])
    if with_increments:
        first, incs = schur_increments(Gamma)
    return QefEvaluation(theta=float(theta), N=N, alphas=alphas, betas=betas, Gamma_N=Gamma,
                         r_N=r, log_det_gamma=ld, log_Xi_N=-0.5 * ld.real,
                         log_det_gamma1=first, schur_increments=[z.real for z in incs])


@dataclass(frozen=True)
class SeriesResult:
    theta: float
    log_Xi: float
    log_det_gamma1: float
    increments: list
    partial_sums: list
    converged: bool

    @property
    def N_used(self) -> int:
        return len(self.partial_sums)


def qef_series(theta: float, lambdas, P_N, tol: float = 1e-12, N_max: int | None = None,
               strict: bool = False) -> SeriesResult:
    """Accumulate ``ln Xi`` through successive Schur complements.

    ``partial_sums[n-1]`` is ``ln Xi_n``.  Stops once three consecutive
    contributions ``-ln det Gamma_{n+1|n} / 2`` are below ``tol`` in magnitude.
    When ``N_max`` is reached first the result has ``converged=False``; with
    ``strict=True`` a :class:`NotConverged` carrying it is raised instead.
    """
    P_N = np.asarray(P_N, dtype=float)
    N_avail = P_N.shape[0] // 2
    N_max = N_avail if N_max is None else min(N_max, N_avail)
    lam = np.asarray(lambdas, dtype=float)[:N_max]
    P_use = P_N[:2 * N_max, :2 * N_max]
    r = admissibility_radius(theta, lam, P_use)
    if r >= 1.0 - RADIUS_MARGIN:
        raise RadiusExceeded(f"r_N = {r:.15g} >= 1 at theta = {theta!r}", radius=r)
    Gamma = gamma_matrix(theta, lam, P_use)

    first = log_det(Gamma[:3, :3]).real
    total = -0.5 * first
    partial = [total]
    incs = []
    small = 0
    converged = False
    for n in range(1, N_max):
        m = 3 * n
        lu = scipy.linalg.lu_factor(Gamma[:m, :m])
        S = Gamma[m:m + 3, m:m + 3] - Gamma[m:m + 3, :m] @ scipy.linalg.lu_solve(lu, Gamma[:m, m:m + 3])
        inc = log_det(S).real
        incs.append(inc)
        total += -0.5 * inc
        partial.append(total)
        small = small + 1 if abs(0.5 * inc) < tol else 0
        if small >= 3:
            converged = True
            break
    result = SeriesResult(theta=float(theta), log_Xi=total, log_det_gamma1=first,
                          increments=incs, partial_sums=partial, converged=converged)
    if strict and not converged:
        raise NotConverged(f"series not settled after N={N_max} terms at theta={theta!r}", result)
    return result


def weighting_matrices(basis: SpectralBasis, Pi, nu: float,
                       quad: QuadratureConfig | None = None) -> np.ndarray:
    """``G_jk = int_0^T f_j f_k U(t)^T Pi U(t) dt`` as an (N, N, 2, 2) array.

    Scalar ``Pi = c I_2`` is handled exactly (``G_jk = c delta_jk I_2``).
    """
    Pi = np.asarray(Pi, dtype=float)
    if Pi.shape != (2, 2) or abs(Pi[0, 1] - Pi[1, 0]) > 1e-14 * max(1.0, np.abs(Pi).max()):
        raise NotPSD("Pi must be a symmetric 2x2 matrix")
    if np.linalg.eigvalsh(Pi)[0] < -1e-14 * max(1.0, np.abs(Pi).max()):
        raise NotPSD("Pi must be positive semi-definite")
    N = basis.count
    if Pi[0, 1] == 0 and Pi[0, 0] == Pi[1, 1]:
        G = np.zeros((N, N, 2, 2))
        idx = np.arange(N)
        G[idx, idx] = Pi[0, 0] * np.eye(2)
        return G
    quad = quad or QuadratureConfig()
    omega_max = 2.0 * float(basis.omegas[-1]) + 2.0 * abs(nu)
    t, w = basis_rule(basis, quad, omega_max)
    U = rotation_U(nu, t)
    Mt = np.swapaxes(U, -1, -2) @ Pi @ U
    F = eigenfunctions(basis, t)
    return np.einsum("jt,kt,t,tab->jkab", F, F, w, Mt)


def critical_theta(lambdas, P_N, bracket: tuple[float, float] | None = None,
                   tol: float = 1e-10) -> float:
    """Risk sensitivity at which ``r_N`` reaches 1, by bisection.

    Without a bracket, ``(0, hi)`` is used with ``hi`` doubled from
    ``1 / lambda_1`` until ``r_N(hi) > 1``.
    """
    lam = np.asarray(lambdas, dtype=float)
    radius = lambda th: admissibility_radius(th, lam, P_N)  # noqa: E731
    if bracket is None:
        lo, hi = 0.0, 1.0 / float(lam[0])
        for _ in range(200):
            if radius(hi) > 1.0:
                break
            lo, hi = hi, 2.0 * hi
    else:
        lo, hi = map(float, bracket)
    if not (0 <= lo < hi and radius(lo) < 1.0 < radius(hi)):
        raise BracketInvalid(f"bracket ({lo}, {hi}) does not straddle r_N = 1")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if radius(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    theta_star = 0.5 * (lo + hi)
    if abs(radius(theta_star) - 1.0) > tol:
        raise ConvergenceFailure(f"|r_N(theta*) - 1| = {abs(radius(theta_star) - 1.0):.3e} > {tol:g}")
    return theta_star
