"""Ordinary least-squares estimators and their raw error decompositions.

Three estimators are provided: the scalar last-step estimator, the batch
matrix estimator [A B] on the final transition of each experiment (with an
optional pooled mode over every transition), and the single-trajectory
estimator in autonomous or controlled form.  Each reports the pieces of the
OLS error identity theta_hat - theta_* = (sum w z^T)(sum z z^T)^{-1}.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import DimensionMismatch, SingularGram, ZeroDenominator
from .serialize import matrix_json
from .systems import LtiSystem, SingleTrajectory, TrajectoryBatch

# Relative eigenvalue threshold under which a Gram matrix counts as singular.
GRAM_RTOL = 1e-12


def spectral_norm(m: np.ndarray, tol: float = 1e-10, max_iter: int = 5000) -> float:
    """Largest singular value by power iteration on the smaller Gram side.

    Deterministic: the start vector comes from a fixed internal stream.
    Cross-checked against full decompositions in the test suite.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0.0
    gram = m.T @ m if m.shape[0] >= m.shape[1] else m @ m.T
    scale = np.max(np.abs(gram))
    if scale == 0.0:
        return 0.0
    v = rng.stream(0, rng.TAG_POWER_ITER).normal(size=gram.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    # trigger well below tol: the gap to the limit is a multiple of the
    # per-step change when the eigenvalue ratio is close to one
    trigger = 0.01 * tol
    for _ in range(max_iter):
        w = gram @ v
        lam_new = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        if abs(lam_new - lam) <= trigger * max(abs(lam_new), scale * 1e-16):
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(max(lam, 0.0)))


def _solve_gram(gram: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve gram @ x = rhs via the eigendecomposition of the symmetrized Gram.

    Returns (solution, eigenvalues).  Raises SingularGram when the minimum
    eigenvalue falls below GRAM_RTOL times the maximum.
    """
    gram = (gram + gram.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(gram)
    if eigvals[-1] <= 0.0 or eigvals[0] < GRAM_RTOL * eigvals[-1]:
        raise SingularGram(
            f"Gram matrix numerically singular (eig range [{eigvals[0]:.3e}, {eigvals[-1]:.3e}])"
        )
    return eigvecs @ ((eigvecs.T @ rhs) / eigvals[:, None]), eigvals


@dataclass
class Estimate:
    """Fitted theta_hat (ell x n) with Gram/cross-term diagnostics.

    For system estimates, theta_hat partitions as [A_hat B_hat] with
    n = n_x + n_u columns.  ``cross`` is Z^T W (available only when the
    ground truth was supplied), ``err_a``/``err_b`` the spectral-norm
    errors against that truth.
    """

    theta_hat: np.ndarray
    gram: np.ndarray
    residual_norm: float
    n_x: int
    n_u: int
    gram_eigvals: np.ndarray = field(repr=False, default=None)
    cross: np.ndarray | None = None
    err_a: float | None = None
    err_b: float | None = None

    @property
    def a_hat(self) -> np.ndarray:
        return self.theta_hat[:, : self.n_x]

    @property
    def b_hat(self) -> np.ndarray:
        return self.theta_hat[:, self.n_x :]

    def to_json_dict(self) -> dict:
        out = {
            "theta_hat": matrix_json(self.theta_hat),
            "gram_eig_min": float(self.gram_eigvals[0]),
            "gram_eig_max": float(self.gram_eigvals[-1]),
            "residual_norm": float(self.residual_norm),
            "n_x": self.n_x,
            "n_u": self.n_u,
        }
        if self.err_a is not None:
            out["err_a"] = float(self.err_a)
        if self.err_b is not None:
            out["err_b"] = float(self.err_b)
        return out


@dataclass
class ScalarEstimate:
    """Last-step scalar estimate a_hat with its error e_N when truth is known."""

    a_hat: float
    gram: float
    error: float | None = None


def _fit(z: np.ndarray, y: np.ndarray, n_x: int, n_u: int, theta_star: np.ndarray | None) -> Estimate:
    gram = z.T @ z
    solution, eigvals = _solve_gram(gram, z.T @ y)
    theta_hat = solution.T
    residual = y - z @ solution
    est = Estimate(
        theta_hat=theta_hat,
        gram=(gram + gram.T) / 2.0,
        residual_norm=float(np.linalg.norm(residual)),
        n_x=n_x,
        n_u=n_u,
        gram_eigvals=eigvals,
    )
    if theta_star is not None:
        theta_star = np.atleast_2d(np.asarray(theta_star, dtype=float))
        if theta_star.shape != theta_hat.shape:
            raise DimensionMismatch(
                f"truth shape {theta_star.shape} does not match estimate {theta_hat.shape}"
            )
        est.cross = z.T @ (y - z @ theta_star.T)
        est.err_a = spectral_norm(est.a_hat - theta_star[:, :n_x])
        if n_u:
            est.err_b = spectral_norm(est.b_hat - theta_star[:, n_x:])
    return est


def ols_scalar_lastpoint(batch: TrajectoryBatch, a_true: float | None = None) -> ScalarEstimate:
    """Scalar last-step estimator a_hat = sum x (x' - u) / sum x^2.

    Uses the final transition (x_{T-1}, u_{T-1}) -> x_T of each experiment,
    so the summands are i.i.d. across experiments.  Raises ZeroDenominator
    when every covariate is zero.
    """
    if batch.n_x != 1 or batch.n_u != 1:
        raise DimensionMismatch("scalar estimator requires n_x = n_u = 1")
    z, y = batch.last_transition()
    x, u = z[:, 0], z[:, 1]
    denom = float(x @ x)
    if denom == 0.0:
        raise ZeroDenominator("all last-step covariates are zero")
    a_hat = float(x @ (y[:, 0] - u)) / denom
    error = None if a_true is None else a_hat - float(a_true)
    return ScalarEstimate(a_hat=a_hat, gram=denom, error=error)


def ols_batch(
    batch: TrajectoryBatch,
    truth: LtiSystem | tuple[np.ndarray, np.ndarray] | None = None,
    pooled: bool = False,
) -> Estimate:
    """Least-squares [A_hat B_hat] from a batch of experiments.

    By default fits on the final transition of each experiment (independent
    covariates); ``pooled=True`` stacks every transition of every experiment,
    which is the objective the bootstrap algorithm refits.
    """
    z, y = batch.pooled_transitions() if pooled else batch.last_transition()
    theta_star = None
    if truth is not None:
        if isinstance(truth, LtiSystem):
            theta_star = truth.theta
        else:
            a, b = truth
            theta_star = np.hstack([np.atleast_2d(a), np.atleast_2d(b)])
    return _fit(z, y, batch.n_x, batch.n_u, theta_star)


def ols_single_traj(
    traj: SingleTrajectory,
    mode: str = "autonomous",
    truth: LtiSystem | np.ndarray | None = None,
) -> Estimate:
    """Single-trajectory estimator Theta_hat = argmin sum_t |y_t - Theta z_t|^2.

    mode 'autonomous' regresses x_{t+1} on z_t = x_t; 'controlled' on
    z_t = (x_t, u_t).  The covariates are serially dependent; the
    data-dependent certificates in ``certs`` handle that regime.
    """
    z, y = traj.regressors(mode)
    n_x = traj.n_x
    n_u = z.shape[1] - n_x
    theta_star = None
    if truth is not None:
        if isinstance(truth, LtiSystem):
            theta_star = truth.a if mode == "autonomous" else truth.theta
        else:
            theta_star = np.atleast_2d(truth)
    return _fit(z, y, n_x, n_u, theta_star)
