"""Brute-force cross-checks that do not share code with the analytic paths.

* Nystrom discretisation of the exponential kernel on a uniform grid with
  trapezoidal weights, compared with the analytic spectrum.
* Ordered (quantum) Isserlis moments of the quadratic form
  ``Q_N = Z^T W Z`` with ``W = diag(lambda_k) (x) I_2``, compared with the
  small-``theta`` expansion of the determinant formula.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from .errors import GridTooSmall

NYSTROM_EIG_TOL = 5e-3
NYSTROM_FN_TOL = 1e-2


@dataclass(frozen=True)
class NystromResult:
    n: int
    spacing: float
    grid: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns are grid samples of L2-normalised eigenfunctions
    eig_rel_errors: np.ndarray | None = None
    fn_l2_distances: np.ndarray | None = None


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def nystrom_spectrum(mu: float, T: float, n: int, N: int, reference=None, n_functions: int = 5) -> NystromResult:
    """Leading ``N`` eigenpairs of the trapezoid-weighted kernel matrix.

    ``reference`` may be a :class:`~oqho.eigenbasis.SpectralBasis`; the
    relative eigenvalue errors and sign-aligned L2 distances to the first
    ``n_functions`` analytic eigenfunctions are then filled in.
    """
    if n < 50 * N:
        raise GridTooSmall(f"grid size n={n} must be at least 50*N = {50 * N}")
    t = np.linspace(0.0, T, n)
    h = T / (n - 1)
    w = _trapezoid_weights(n, h)
    sw = np.sqrt(w)
    K = np.exp(-mu * np.abs(t[:, None] - t[None, :]))
    K *= sw[:, None]
    K *= sw[None, :]
    vals, vecs = scipy.linalg.eigh(K, subset_by_index=[n - N, n - 1], driver="evr")
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    funcs = vecs[:, order] / sw[:, None]

    rel = dist = None
    if reference is not None:
        lam = np.asarray(reference.lambdas[:N])
        rel = np.abs(vals - lam) / lam
        m = min(n_functions, N, reference.count)
        w_ = np.asarray(reference.omegas[:m])[None, :]
        g_ = np.asarray(reference.gammas[:m])[None, :]
        exact = (w_ * np.cos(w_ * t[:, None]) + mu * np.sin(w_ * t[:, None])) / g_
        approx = funcs[:, :m].copy()
        sign = np.sign(w @ (approx * exact))
        sign[sign == 0] = 1.0
        approx *= sign
        dist = np.sqrt(w @ (approx - exact) ** 2)
    return NystromResult(n=n, spacing=h, grid=t, eigenvalues=vals, eigenvectors=funcs,
                         eig_rel_errors=rel, fn_l2_distances=dist)


@dataclass(frozen=True)
class WickMoments:
    m1: float
    m2: float

    @property
    def kappa1(self) -> float:
        return self.m1

    @property
    def kappa2(self) -> float:
        return self.m2 - self.m1 * self.m1


def wick_moments(lambdas, P_N, N: int | None = None) -> WickMoments:
    """First two moments of ``Q_N`` in the zero-mean Gaussian state ``K_N``.

    The ordered fourth moment ``E z_a z_b z_c z_d = K_ab K_cd + K_ac K_bd +
    K_ad K_bc`` contracted with a symmetric ``W`` gives
    ``E Q^2 = tr(WK)^2 + 2 tr(W K W K^T)``.
    """
    P_N = np.asarray(P_N, dtype=float)
    N = P_N.shape[0] // 2 if N is None else N
    P_N = P_N[:2 * N, :2 * N]
    Jb = np.array([[0.0, 1.0], [-1.0, 0.0]])
    K = P_N + 0.5j * np.kron(np.eye(N), Jb)
    wdiag = np.repeat(np.asarray(lambdas, dtype=float)[:N], 2)
    WK = wdiag[:, None] * K
    WKt = wdiag[:, None] * K.T
    m1c = np.trace(WK)
    m2c = m1c * m1c + 2.0 * np.sum(WK * WKt.T)
    if abs(m1c.imag) > 1e-12 * max(1.0, abs(m1c)) or abs(m2c.imag) > 1e-12 * max(1.0, abs(m2c)):
        raise ArithmeticError("Wick moments have a non-negligible imaginary part")
    return WickMoments(m1=float(m1c.real), m2=float(m2c.real))


@dataclass(frozen=True)
class TaylorReport:
    theta: float
    log_xi: float
    quadratic_model: float
    residual: float
    relative_residual: float
    residual_half: float
    ratio: float
    at_rounding_level: bool


def taylor_match(theta: float, lambdas, P_N, log_xi) -> TaylorReport:
    """Compare ``ln Xi_N`` with ``theta kappa1 + theta^2 kappa2 / 2``.

    ``log_xi`` is a callable ``theta -> ln Xi_N`` (the path under test).  The
    residual is probed again at ``theta / 2``; for a cubic remainder the
    ratio of residuals is close to 8.  When the remainder vanishes (e.g. a
    coherent vacuum state, where ``Q_N`` has no fluctuations) the residuals
    sit at rounding level and ``at_rounding_level`` is set.
    """
    mom = wick_moments(lambdas, P_N)
    if theta == 0:
        return TaylorReport(0.0, float(log_xi(0.0)), 0.0, 0.0, 0.0, 0.0, math.nan, True)

    def resid(th):
        model = th * mom.kappa1 + 0.5 * th * th * mom.kappa2
        val = float(log_xi(th))
        return val, model, val - model

    val, model, r1 = resid(theta)
    _, _, r2 = resid(0.5 * theta)
    floor = 1e3 * np.finfo(float).eps * max(abs(val), 1e-300)
    at_floor = abs(r1) < floor
    ratio = r1 / r2 if r2 != 0 else math.inf
    return TaylorReport(theta=theta, log_xi=val, quadratic_model=model, residual=r1,
                        relative_residual=abs(r1) / abs(val) if val else 0.0,
                        residual_half=r2, ratio=ratio, at_rounding_level=bool(at_floor))


@dataclass
class Check:
    name: str
    computed: float
    reference: float
    tolerance: float
    passed: bool
    note: str = ""


@dataclass
class OracleReport:
    checks: list = field(default_factory=list)

    def add(self, name, computed, reference, tolerance, passed, note=""):
        self.checks.append(Check(name, float(computed), float(reference), float(tolerance), bool(passed), note))

    def upper(self, name, computed, tolerance, note=""):
        """Record a check of the form ``computed <= tolerance``."""
        self.add(name, computed, 0.0, tolerance, computed <= tolerance, note)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}
