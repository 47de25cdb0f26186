"""Spectrum and eigenfunctions of the exponential kernel on [0, T].

The integral operator ``(C f)(s) = int_0^T exp(-mu |s - t|) f(t) dt`` has
eigenvalues ``lambda_k = 2 mu / (mu^2 + omega_k^2)`` and orthonormal
eigenfunctions

    f_k(t) = (omega_k cos(omega_k t) + mu sin(omega_k t)) / gamma_k,
    gamma_k^2 = T (omega_k^2 + mu^2) / 2 + mu,

where ``omega_k = mu u_k`` and ``u_k`` is the root of
``r u + 2 arctan(u) = pi k`` with ``r = mu T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, GridTooCoarse, IndexOutOfRange, TimeOutOfDomain
from .quadrature import QuadratureConfig, composite_rule
from .system import kernel_C

BISECTION_WIDTH = 1e-8
NEWTON_TOL = 1e-13
NEWTON_MAXITER = 50


@dataclass(frozen=True)
class SpectralBasis:
    mu: float
    T: float
    u: np.ndarray
    omegas: np.ndarray
    lambdas: np.ndarray
    gammas: np.ndarray

    @property
    def r(self) -> float:
        return self.mu * self.T

    @property
    def count(self) -> int:
        return self.u.size

    @property
    def residual_pik(self) -> np.ndarray:
        k = np.arange(1, self.count + 1)
        return self.r * self.u + 2.0 * np.arctan(self.u) - math.pi * k

    @property
    def residual_trans(self) -> np.ndarray:
        """Residual of the frequency equation in its original trigonometric form."""
        w, mu, T = self.omegas, self.mu, self.T
        return 2.0 * mu * w * np.cos(w * T) + (mu * mu - w * w) * np.sin(w * T)

    @property
    def trace_deficit(self) -> float:
        """``T - sum(lambda_k)``: the kernel trace not captured by the basis."""
        return self.T - float(np.sum(self.lambdas))

    def truncate(self, N: int) -> "SpectralBasis":
        if not 0 <= N <= self.count:
            raise IndexOutOfRange(f"cannot truncate a {self.count}-term basis to N={N}")
        return SpectralBasis(self.mu, self.T, self.u[:N], self.omegas[:N],
                             self.lambdas[:N], self.gammas[:N])


def _pik_roots(r: float, N: int) -> np.ndarray:
    k = np.arange(1, N + 1, dtype=float)
    target = math.pi * k
    lo = math.pi * (k - 1.0) / r
    hi = target / r

    def h(u):
        return r * u + 2.0 * np.arctan(u) - target

    # fixed schedule: identical results whether roots are solved together or one by one
    n_bisect = max(0, math.ceil(math.log2((math.pi / r) / BISECTION_WIDTH)))
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        neg = h(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)

    tol = np.maximum(NEWTON_TOL, 4.0 * np.finfo(float).eps * target)
    u = 0.5 * (lo + hi)
    for _ in range(NEWTON_MAXITER):
        res = h(u)
        if np.all(np.abs(res) <= tol):
            break
        step = res / (r + 2.0 / (1.0 + u * u))
        u = np.clip(u - step, lo, hi)
    res = h(u)
    bad = np.flatnonzero(np.abs(res) > tol)
    if bad.size:
        k0 = int(bad[0]) + 1
        raise ConvergenceFailure(
            f"root k={k0} did not reach |h| <= {tol[bad[0]]:.1e} (|h| = {abs(res[bad[0]]):.3e})")
    return u


def solve_roots(mu: float, T: float, N: int) -> SpectralBasis:
    """Solve for the first ``N`` eigenpairs of the exponential kernel on [0, T].

    Each dimensionless root is bracketed in ``(pi (k-1) / r, pi k / r)``,
    bisected to width 1e-8 and polished by Newton's method.
    """
    if not mu > 0:
        raise ValueError(f"mu={mu!r} must be positive")
    if not T > 0:
        raise ValueError(f"T={T!r} must be positive")
    if int(N) != N or N < 1:
        raise ValueError(f"N={N!r} must be a positive integer")
    u = _pik_roots(mu * T, int(N))
    omegas = mu * u
    lambdas = 2.0 * mu / (mu * mu + omegas * omegas)
    gammas = np.sqrt(0.5 * T * (omegas * omegas + mu * mu) + mu)
    for arr in (u, omegas, lambdas, gammas):
        arr.setflags(write=False)
    return SpectralBasis(mu=float(mu), T=float(T), u=u, omegas=omegas, lambdas=lambdas, gammas=gammas)


def _check_time(basis: SpectralBasis, t: np.ndarray) -> None:
    slack = 1e-12 * max(1.0, basis.T)
    if np.any(t < -slack) or np.any(t > basis.T + slack):
        raise TimeOutOfDomain(f"t must lie in [0, {basis.T}]")


def eigenfunctions(basis: SpectralBasis, t, deriv: int = 0) -> np.ndarray:
    """All eigenfunctions (or a derivative of order 0, 1, 2) at ``t``.

    Returns an array of shape ``(basis.count,) + shape(t)``.
    """
    t = np.asarray(t, dtype=float)
    w = basis.omegas.reshape((-1,) + (1,) * t.ndim)
    g = basis.gammas.reshape(w.shape)
    mu = basis.mu
    c, s = np.cos(w * t), np.sin(w * t)
    if deriv == 0:
        return (w * c + mu * s) / g
    if deriv == 1:
        return w * (mu * c - w * s) / g
    if deriv == 2:
        return -w * w * (w * c + mu * s) / g
    raise ValueError(f"deriv={deriv} not supported")


def eigenfunction_eval(basis: SpectralBasis, k: int, t, deriv: int = 0):
    """Evaluate ``f_k`` (1-based ``k``) or its derivative at ``t`` in [0, T]."""
    if not 1 <= k <= basis.count:
        raise IndexOutOfRange(f"k={k} outside 1..{basis.count}")
    t = np.asarray(t, dtype=float)
    _check_time(basis, t)
    sub = SpectralBasis(basis.mu, basis.T, basis.u[k - 1:k], basis.omegas[k - 1:k],
                        basis.lambdas[k - 1:k], basis.gammas[k - 1:k])
    out = eigenfunctions(sub, t, deriv)[0]
    return float(out) if out.ndim == 0 else out


def basis_rule(basis: SpectralBasis, quad: QuadratureConfig, omega_max: float | None = None):
    """Quadrature nodes on [0, T] resolving products of two basis functions."""
    if omega_max is None:
        omega_max = 2.0 * float(basis.omegas[-1]) if basis.count else 0.0
    panels = quad.panel_count(omega_max, basis.T)
    return composite_rule(0.0, basis.T, panels, quad.nodes_per_panel)


def gram_matrix(basis: SpectralBasis, quad: QuadratureConfig | None = None) -> np.ndarray:
    """Matrix of inner products ``<f_j, f_k>`` on [0, T] by composite quadrature."""
    quad = quad or QuadratureConfig()
    t, w = basis_rule(basis, quad)
    F = eigenfunctions(basis, t)
    return (F * w) @ F.T


def apply_covariance_operator(mu: float, T: float, f, s, quad: QuadratureConfig | None = None,
                              band: float = 0.0, derivative: bool = False):
    """Apply ``g(s) = int_0^T exp(-mu |s - t|) f(t) dt`` at the points ``s``.

    ``f`` is a vectorised callable on [0, T] whose highest angular frequency
    is ``band``.  The integral is split at ``t = s`` where the kernel has a
    kink.  With ``derivative=True`` the pair ``(g, g')`` is returned.
    """
    quad = quad or QuadratureConfig()
    s = np.asarray(s, dtype=float)
    panels = quad.panel_count(band, T)
    if band > 0:
        nodes_per_period = panels * quad.nodes_per_panel / (band * T / (2.0 * math.pi))
        if nodes_per_period < 4:
            raise GridTooCoarse(
                f"{nodes_per_period:.2f} nodes per period of the band {band}; need at least 4")
    tl, wl = composite_rule(0.0, s, panels, quad.nodes_per_panel)
    tr, wr = composite_rule(s, T, panels, quad.nodes_per_panel)
    sc = s[..., None]
    left = np.sum(wl * np.exp(-mu * (sc - tl)) * f(tl), axis=-1)
    right = np.sum(wr * np.exp(-mu * (tr - sc)) * f(tr), axis=-1)
    g = left + right
    if derivative:
        return g, mu * (right - left)
    return g


def mercer_partial_sum(basis: SpectralBasis, s, t, N: int | None = None):
    """Truncated Mercer series ``sum_{k<=N} lambda_k f_k(s) f_k(t)``."""
    N = basis.count if N is None else N
    if N > basis.count:
        raise IndexOutOfRange(f"N={N} exceeds basis size {basis.count}")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if N == 0:
        return np.zeros(np.broadcast_shapes(s.shape, t.shape))
    sub = basis.truncate(N)
    Fs = eigenfunctions(sub, s)
    Ft = eigenfunctions(sub, t)
    lam = sub.lambdas.reshape((-1,) + (1,) * (Fs.ndim - 1))
    return np.sum(lam * Fs * Ft, axis=0)


def mercer_l2_error(basis: SpectralBasis, N: int, quad: QuadratureConfig | None = None,
                    omega_max: float | None = None) -> float:
    """``|| C(s - t) - partial_N(s, t) ||`` in L^2([0, T]^2).

    Both variables use the same composite rule.  The kink along the diagonal
    limits this to an estimate; pass a common ``omega_max`` when comparing
    truncation orders so that all of them see the same grid.
    """
    quad = quad or QuadratureConfig()
    sub = basis.truncate(N)
    if omega_max is None:
        omega_max = 2.0 * float(sub.omegas[-1]) if N else 0.0
    panels = quad.panel_count(omega_max, basis.T)
    t, w = composite_rule(0.0, basis.T, panels, quad.nodes_per_panel)
    F = eigenfunctions(sub, t)
    diff = kernel_C(basis.mu, t[:, None] - t[None, :]) - F.T @ (sub.lambdas[:, None] * F)
    return float(np.sqrt(w @ (diff * diff) @ w))
