"""Data-dependent confidence certificates.

These bounds are computable from recorded data alone: the confidence
ellipsoid for independent samples, its per-block spectral corollary, the
self-normalized martingale radius, and the single-trajectory certificate
that combines the two.  Determinants are always handled in log space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidDelta,
    OrderingViolated,
    SingularGram,
    SingularRegularizer,
    TooFewSamples,
)
from .theory import BoundCertificate

# Relative threshold below which a Gram eigenvalue counts as exactly zero.
_ZERO_RTOL = 1e-12


def _check_delta(delta: float) -> float:
    if not 0.0 < delta <= 1.0:
        raise InvalidDelta(f"delta must lie in (0, 1], got {delta}")
    return float(delta)


def _chol_logdet(m: np.ndarray, exc: type, name: str) -> float:
    try:
        chol = np.linalg.cholesky((m + m.T) / 2.0)
    except np.linalg.LinAlgError:
        raise exc(f"{name} must be positive definite") from None
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


@dataclass
class EllipsoidCertificate:
    """Confidence ellipsoid E E^T <= C^2 (Z^T Z)^{-1} for the OLS error E.

    The shape matrix is stored through the eigendecomposition of Z^T Z so
    that zero eigenvalues invert to +inf directions instead of overflowing;
    ``shape`` reconstructs the finite part.
    """

    scale_c2: float
    delta: float
    n_x: int
    n_u: int
    inv_eigvals: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)

    @property
    def infinite_directions(self) -> int:
        return int(np.sum(np.isinf(self.inv_eigvals)))

    @property
    def shape(self) -> np.ndarray:
        """(Z^T Z)^{-1} restricted to its finite eigen-directions."""
        finite = np.isfinite(self.inv_eigvals)
        v = self.basis[:, finite]
        return (v * self.inv_eigvals[finite]) @ v.T

    def containment_margin(self, error: np.ndarray) -> float:
        """Minimum eigenvalue of C^2 (Z^T Z)^{-1} - E E^T on the finite subspace.

        Nonnegative (up to round-off) exactly when the error matrix is
        contained; infinite directions are contained by convention.
        """
        error = np.atleast_2d(np.asarray(error, dtype=float))
        finite = np.isfinite(self.inv_eigvals)
        v = self.basis[:, finite]
        restricted = self.scale_c2 * np.diag(self.inv_eigvals[finite]) - (v.T @ error) @ (
            error.T @ v
        )
        return float(np.linalg.eigvalsh((restricted + restricted.T) / 2.0)[0])

    def to_json_dict(self) -> dict:
        return {
            "scale_c2": float(self.scale_c2),
            "delta": float(self.delta),
            "n_x": self.n_x,
            "n_u": self.n_u,
            "infinite_directions": self.infinite_directions,
            "shape": [float(v) for v in self.shape.ravel()],
            "dim": int(self.basis.shape[0]),
        }


def confidence_ellipsoid(z: np.ndarray, n_x: int, sigma_w: float, delta: float) -> EllipsoidCertificate:
    """Confidence ellipsoid for [A_hat - A; B_hat - B]^T from N independent samples.

    C^2 = sigma_w^2 (sqrt(n + p) + sqrt(n) + sqrt(2 log(1/delta)))^2 where n
    is the state dimension and p the input dimension; requires N >= n + p.
    Zero eigenvalues of Z^T Z invert to +inf.
    """
    _check_delta(delta)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n_samples, dim = z.shape
    if not 0 < n_x <= dim:
        raise ValueError(f"n_x = {n_x} incompatible with covariate dimension {dim}")
    n_u = dim - n_x
    if n_samples < dim:
        raise TooFewSamples(f"need N >= n_x + n_u = {dim}, got {n_samples}")
    c2 = sigma_w**2 * (math.sqrt(dim) + math.sqrt(n_x) + math.sqrt(2.0 * math.log(1.0 / delta))) ** 2
    gram = z.T @ z
    eigvals, eigvecs = np.linalg.eigh((gram + gram.T) / 2.0)
    cutoff = _ZERO_RTOL * max(eigvals[-1], 0.0)
    inv = np.where(eigvals > cutoff, 1.0 / np.where(eigvals > cutoff, eigvals, 1.0), np.inf)
    return EllipsoidCertificate(
        scale_c2=c2, delta=delta, n_x=n_x, n_u=n_u, inv_eigvals=inv, basis=eigvecs
    )


def block_spectral_bounds(cert: EllipsoidCertificate) -> tuple[float, float]:
    """Spectral error bounds (eps_A, eps_B) from an ellipsoid certificate.

    eps_A = C |Q_A M Q_A^T|_2^{1/2} with M = (Z^T Z)^{-1} and Q_A, Q_B the
    state/input row selectors.  A block touching an infinite eigen-direction
    yields +inf rather than an exception.
    """
    c = math.sqrt(cert.scale_c2)
    dim = cert.basis.shape[0]
    out = []
    for lo, hi in ((0, cert.n_x), (cert.n_x, dim)):
        if hi == lo:
            out.append(0.0)
            continue
        rows = cert.basis[lo:hi, :]
        finite = np.isfinite(cert.inv_eigvals)
        # an infinite direction enters the block iff it has weight on these rows
        leak = np.linalg.norm(rows[:, ~finite], axis=0) if (~finite).any() else np.array([])
        if leak.size and np.any(leak > 1e-12):
            out.append(math.inf)
            continue
        block = (rows[:, finite] * cert.inv_eigvals[finite]) @ rows[:, finite].T
        lam = float(np.linalg.eigvalsh((block + block.T) / 2.0)[-1])
        out.append(c * math.sqrt(max(lam, 0.0)))
    return out[0], out[1]


@dataclass
class SnmState:
    """State of the self-normalized bound: regularizer V, Gram V_T, noise scale R^2."""

    v: np.ndarray
    v_t: np.ndarray
    r2: float
    s_t: np.ndarray | None = None

    def __post_init__(self):
        self.v = np.atleast_2d(np.asarray(self.v, dtype=float))
        self.v_t = np.atleast_2d(np.asarray(self.v_t, dtype=float))
        if self.v.shape != self.v_t.shape:
            raise ValueError("V and V_T must have equal shapes")
        if self.r2 <= 0:
            raise ValueError("R^2 must be positive")

    @property
    def v_bar(self) -> np.ndarray:
        return self.v + self.v_t


def snm_radius(state: SnmState, delta: float) -> float:
    """Squared self-normalized radius 2 R^2 log(det(V_bar)^{1/2} det(V)^{-1/2} / delta).

    Uniform over time: with probability 1 - delta the scaled martingale
    |V_bar_t^{-1/2} S_t|^2 stays below this radius at every t.
    """
    _check_delta(delta)
    logdet_v = _chol_logdet(state.v, SingularRegularizer, "regularizer V")
    logdet_bar = _chol_logdet(state.v_bar, SingularRegularizer, "V_bar")
    return 2.0 * state.r2 * (0.5 * (logdet_bar - logdet_v) + math.log(1.0 / delta))


def single_traj_radius(
    v_t: np.ndarray,
    v: np.ndarray,
    n_x: int,
    sigma_w: float,
    alpha: float,
    delta: float,
) -> BoundCertificate:
    """Single-trajectory certificate from the empirical Gram V_T and reference V.

    sqrt(8 (1 + alpha)) sigma_w sqrt((n_x log(9/delta)
    + log det(V_T V^{-1}) / 2) / lambda_min(V_T)), certified only when
    V <= alpha V_T (which gives V_bar <= (1 + alpha) V_T).
    """
    _check_delta(delta)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    v_t = np.atleast_2d(np.asarray(v_t, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    logdet_v = _chol_logdet(v, SingularRegularizer, "reference V")
    eigvals = np.linalg.eigvalsh((v_t + v_t.T) / 2.0)
    lam_min = float(eigvals[0])
    if lam_min <= 0.0:
        raise SingularGram("empirical Gram V_T must be positive definite")
    diff = alpha * v_t - v
    margin = float(np.linalg.eigvalsh((diff + diff.T) / 2.0)[0])
    scale = max(float(np.trace(v_t)), float(np.trace(v)), 1.0)
    if margin < -1e-10 * scale:
        raise OrderingViolated(f"V <= alpha V_T fails (margin {margin:.3e})")
    logdet_ratio = _chol_logdet(v_t, SingularGram, "V_T") - logdet_v
    value = (
        math.sqrt(8.0 * (1.0 + alpha))
        * sigma_w
        * math.sqrt((n_x * math.log(9.0 / delta) + 0.5 * logdet_ratio) / lam_min)
    )
    return BoundCertificate(
        value=value,
        delta=delta,
        source="single_traj_cert",
        details={
            "alpha": alpha,
            "ordering_margin": margin,
            "lambda_min_vt": lam_min,
            "logdet_ratio": logdet_ratio,
        },
    )


def single_traj_cert(
    z: np.ndarray,
    b_hat: np.ndarray,
    sigma_u: float,
    sigma_w: float,
    alpha: float = 1.0,
    delta: float = 0.05,
) -> BoundCertificate:
    """Certificate for a single-trajectory estimate from its covariates z_1..z_T.

    Builds the reference V = T blkdiag(B B^T sigma_u^2 + sigma_w^2 I,
    sigma_u^2 I) from the supplied input matrix (the fitted B_hat when the
    truth is unknown) and delegates to :func:`single_traj_radius`.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    b_hat = np.atleast_2d(np.asarray(b_hat, dtype=float))
    horizon, dim = z.shape
    n_x = b_hat.shape[0]
    n_u = dim - n_x
    if n_u != b_hat.shape[1]:
        raise ValueError(
            f"B matrix {b_hat.shape} inconsistent with covariate dimension {dim} and n_x={n_x}"
        )
    v = np.zeros((dim, dim))
    v[:n_x, :n_x] = b_hat @ b_hat.T * sigma_u**2 + sigma_w**2 * np.eye(n_x)
    if n_u:
        v[n_x:, n_x:] = sigma_u**2 * np.eye(n_u)
    v *= horizon
    return single_traj_radius(z.T @ z, v, n_x, sigma_w, alpha, delta)
