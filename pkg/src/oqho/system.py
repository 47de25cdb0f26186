"""One-mode open quantum harmonic oscillator models.

The oscillator is described by an energy matrix ``R`` (2x2, symmetric positive
definite) and a coupling matrix ``M`` (m x 2, m even).  The drift and
dispersion matrices follow from

    A = Jb (R + M^T J M),    B = Jb M^T,

where ``Jb = [[0, 1], [-1, 0]]`` and ``J = Jb (x) I_{m/2}``.  Since ``M^T J M`` is
antisymmetric it equals ``mu * Jb`` for a scalar decay rate ``mu``, and the
eigenvalues of ``A`` are ``-mu +/- i nu`` with ``nu = sqrt(det R)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NotPositiveDefinite, NotStable, OddChannelCount, NotSymmetric

JBAR = np.array([[0.0, 1.0], [-1.0, 0.0]])
SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]])
THETA_CCR = 0.5 * JBAR

_MJM_TOL = 1e-12


def field_ccr_matrix(m: int) -> np.ndarray:
    """Return ``J = Jb (x) I_{m/2}`` for ``m`` field channels."""
    if m < 2 or m % 2:
        raise OddChannelCount(f"field channel count m={m} must be even and >= 2")
    return np.kron(JBAR, np.eye(m // 2))


@dataclass(frozen=True)
class OqhoModel:
    """Validated oscillator model with its derived dynamics.

    Instances are produced by :func:`build_model`; the constructor itself does
    not validate, so ``dataclasses.replace`` can be used to build deliberately
    broken models for diagnostics.
    """

    R: np.ndarray
    M: np.ndarray
    A: np.ndarray
    B: np.ndarray
    mu: float
    nu: float

    @property
    def m(self) -> int:
        return self.M.shape[0]

    @property
    def stable(self) -> bool:
        return self.mu > 0 and self.nu > 0

    @property
    def theta_transient(self) -> float:
        """Typical transient time 1/mu."""
        if self.mu <= 0:
            raise NotStable(f"transient time undefined for mu={self.mu!r}")
        return 1.0 / self.mu

    @cached_property
    def J(self) -> np.ndarray:
        return field_ccr_matrix(self.m)

    def require_stable(self) -> None:
        if not self.stable:
            raise NotStable(f"drift matrix is not Hurwitz: mu={self.mu!r} must be positive")


@dataclass(frozen=True)
class CanonicalModel:
    """Oscillator after the symplectic change of variables ``X~ = S X``.

    In these variables the energy matrix is ``nu I_2`` and the drift matrix is
    exactly ``[[-mu, nu], [-nu, -mu]]``.
    """

    S: np.ndarray
    A_tilde: np.ndarray
    B_tilde: np.ndarray
    mu: float
    nu: float

    @property
    def theta_transient(self) -> float:
        return 1.0 / self.mu


def _check_spd_2x2(R: np.ndarray) -> None:
    if not np.allclose(R, R.T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(R).max())):
        raise NotSymmetric("energy matrix R must be symmetric")
    tr = R[0, 0] + R[1, 1]
    det = R[0, 0] * R[1, 1] - R[0, 1] * R[1, 0]
    if not (R[0, 0] > 0 and det > 1e-12 * tr * tr):
        raise NotPositiveDefinite(f"energy matrix R is not positive definite (det R = {det!r})")


def build_model(R, M, *, require_stable: bool = True) -> OqhoModel:
    """Construct an oscillator model from its energy and coupling matrices.

    Parameters
    ----------
    R : array_like, shape (2, 2)
        Symmetric positive definite energy matrix.
    M : array_like, shape (m, 2)
        Coupling matrix, ``m`` even.
    require_stable : bool
        Raise :class:`NotStable` when ``mu <= 0``.  Pass ``False`` to obtain
        the (non-Hurwitz) model anyway, e.g. to inspect its PR residual.
    """
    R = np.array(R, dtype=float)
    M = np.array(M, dtype=float)
    if R.shape != (2, 2):
        raise ValueError(f"R must be 2x2, got shape {R.shape}")
    if M.ndim != 2 or M.shape[1] != 2:
        raise ValueError(f"M must be m x 2, got shape {M.shape}")
    J = field_ccr_matrix(M.shape[0])
    R = 0.5 * (R + R.T)
    _check_spd_2x2(R)

    MJM = M.T @ J @ M
    mu = float(MJM[0, 1])
    scale = max(1.0, float(np.abs(M).max()) ** 2)
    if np.abs(MJM - mu * JBAR).max() > _MJM_TOL * scale:
        raise ValueError("M^T J M is not a multiple of Jb; coupling matrix is corrupted")

    A = JBAR @ (R + MJM)
    B = JBAR @ M.T
    nu = float(np.sqrt(R[0, 0] * R[1, 1] - R[0, 1] * R[1, 0]))
    for arr in (R, M, A, B):
        arr.setflags(write=False)
    model = OqhoModel(R=R, M=M, A=A, B=B, mu=mu, nu=nu)
    if require_stable:
        model.require_stable()
    return model


def model_from_rates(mu: float, nu: float) -> OqhoModel:
    """Canonical two-channel model ``R = nu I_2``, ``M = sqrt(mu) I_2``."""
    if not mu > 0:
        raise NotStable(f"mu={mu!r} must be positive")
    if not nu > 0:
        raise NotPositiveDefinite(f"nu={nu!r} must be positive")
    return build_model(nu * np.eye(2), np.sqrt(mu) * np.eye(2))


def sqrtm_spd_2x2(R: np.ndarray) -> np.ndarray:
    """Principal square root of a 2x2 symmetric positive definite matrix.

    Uses the closed form ``(R + sqrt(det R) I) / sqrt(tr R + 2 sqrt(det R))``,
    which follows from Cayley-Hamilton applied to the square root.
    """
    s = np.sqrt(R[0, 0] * R[1, 1] - R[0, 1] * R[1, 0])
    t = np.sqrt(R[0, 0] + R[1, 1] + 2.0 * s)
    return (R + s * np.eye(2)) / t


def canonicalize(model: OqhoModel) -> CanonicalModel:
    """Transform to variables with scalar energy matrix via ``S = sqrt(R / nu)``."""
    model.require_stable()
    S = sqrtm_spd_2x2(np.asarray(model.R) / model.nu)
    A_tilde = np.array([[-model.mu, model.nu], [-model.nu, -model.mu]])
    B_tilde = S @ model.B
    for arr in (S, A_tilde, B_tilde):
        arr.setflags(write=False)
    return CanonicalModel(S=S, A_tilde=A_tilde, B_tilde=B_tilde, mu=model.mu, nu=model.nu)


def pr_residual(model: OqhoModel) -> np.ndarray:
    """Physical realizability residual ``A Theta + Theta A^T + B J B^T``."""
    A, B = np.asarray(model.A), np.asarray(model.B)
    J = field_ccr_matrix(B.shape[1])
    return A @ THETA_CCR + THETA_CCR @ A.T + B @ J @ B.T


def kernel_C(mu, tau):
    """Ornstein-Uhlenbeck covariance ``exp(-mu |tau|)``."""
    return np.exp(-mu * np.abs(tau))


def rotation_U(nu, tau):
    """Rotation ``exp(tau nu Jb)``; broadcasts over ``tau`` into (..., 2, 2)."""
    tau = np.asarray(tau, dtype=float)
    c, s = np.cos(nu * tau), np.sin(nu * tau)
    out = np.empty(tau.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = s
    out[..., 1, 0] = -s
    out[..., 1, 1] = c
    return out


def commutator_kernel(model: CanonicalModel, tau):
    """Two-point CCR function ``Lambda(tau) = C(tau) U(tau) Jb / 2``."""
    tau = np.asarray(tau, dtype=float)
    C = kernel_C(model.mu, tau)[..., None, None]
    return 0.5 * C * (rotation_U(model.nu, tau) @ JBAR)


def two_point_sigma(P, model: CanonicalModel, tau):
    """Real part of the invariant two-point covariance.

    ``C(tau) U(tau) P`` for ``tau >= 0`` and ``C(tau) P U(tau)`` otherwise.
    """
    P = np.asarray(P, dtype=float)
    tau = np.asarray(tau, dtype=float)
    U = rotation_U(model.nu, tau)
    C = kernel_C(model.mu, tau)[..., None, None]
    fwd = U @ P
    bwd = P @ U
    return C * np.where((tau >= 0)[..., None, None], fwd, bwd)
