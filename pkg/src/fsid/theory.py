"""A priori error-bound formulas and the tail-bound calculus behind them.

Everything here is data independent: given system constants, sample counts,
and a failure probability, each function evaluates one closed-form bound.
Violated sample-size preconditions never abort a computation; they are
recorded on the returned certificate so coverage experiments can probe
behavior outside the validity region.

All logarithms are natural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainExceeded,
    InvalidBlock,
    InvalidDelta,
    NegativeDeviation,
    NotOrdered,
    NotPositiveDefinite,
    NotUnitVector,
    UnstableRho,
    ZeroSigmaU,
)
from .systems import gramian

# Small-ball probability margin for Gaussian autonomous systems.
BMSB_P = 3.0 / 20.0


def _check_delta(delta: float) -> float:
    if not 0.0 < delta <= 1.0:
        raise InvalidDelta(f"delta must lie in (0, 1], got {delta}")
    return float(delta)


@dataclass(frozen=True)
class TailParams:
    """Sub-Gaussian (sigma^2) or sub-exponential (nu^2, alpha) tail parameters.

    Addition implements the closure laws for sums of independent variables:
    sub-Gaussian variance proxies add; sub-exponential parameters add nu^2
    and take the larger alpha.  Mixing kinds promotes the sub-Gaussian
    summand to a (sigma^2, 0) sub-exponential.
    """

    kind: str
    sigma2: float | None = None
    nu2: float | None = None
    alpha: float | None = None

    @classmethod
    def subgaussian(cls, sigma2: float) -> "TailParams":
        if sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        return cls(kind="subgaussian", sigma2=float(sigma2))

    @classmethod
    def subexponential(cls, nu2: float, alpha: float) -> "TailParams":
        if nu2 <= 0 or alpha < 0:
            raise ValueError("need nu2 > 0 and alpha >= 0")
        return cls(kind="subexponential", nu2=float(nu2), alpha=float(alpha))

    def __add__(self, other: "TailParams") -> "TailParams":
        if self.kind == other.kind == "subgaussian":
            return TailParams.subgaussian(self.sigma2 + other.sigma2)
        a = self if self.kind == "subexponential" else TailParams.subexponential(self.sigma2, 0.0)
        b = other if other.kind == "subexponential" else TailParams.subexponential(other.sigma2, 0.0)
        return TailParams.subexponential(a.nu2 + b.nu2, max(a.alpha, b.alpha))

    def scaled_sum(self, n: int) -> "TailParams":
        """Parameters of the sum of n i.i.d. copies."""
        out = self
        for _ in range(n - 1):
            out = out + self
        return out


@dataclass
class BoundCertificate:
    """One evaluated bound: value, failure probability, formula id, precondition."""

    value: float
    delta: float
    source: str
    precondition_ok: bool = True
    violated_condition: str | None = None
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {
            "value": float(self.value),
            "delta": float(self.delta),
            "source": self.source,
            "precondition_ok": bool(self.precondition_ok),
        }
        if not self.precondition_ok:
            out["violated_condition"] = self.violated_condition
        if self.details:
            out["details"] = {k: float(v) for k, v in self.details.items()}
        return out


def hoeffding_radius(sigma2: float, n: int, delta: float, sides: str = "one") -> float:
    """Deviation radius sqrt(2 sigma^2 log(1/delta) / N) for a sub-Gaussian mean.

    The one-sided radius holds with probability 1 - delta; the two-sided
    variant spends delta/2 per side (union bound) so the same confidence
    1 - delta applies to the absolute deviation.  For variables bounded in
    [a, b], sigma2 = (b - a)^2 / 4 recovers the bounded-variable form.
    """
    _check_delta(delta)
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if n < 1:
        raise ValueError("need n >= 1")
    if sides == "one":
        eff = delta
    elif sides == "two":
        eff = delta / 2.0
    else:
        raise ValueError("sides must be 'one' or 'two'")
    return math.sqrt(2.0 * sigma2 * math.log(1.0 / eff) / n)


def subexp_tail(nu2: float, alpha: float, t: float) -> float:
    """Upper tail bound for a centered (nu^2, alpha) sub-exponential variable.

    exp(-t^2 / 2 nu^2) in the sub-Gaussian regime t <= nu^2/alpha, then
    exp(-t / 2 alpha); the two branches agree at the switch.
    """
    if t < 0:
        raise NegativeDeviation(f"deviation must be nonnegative, got {t}")
    if nu2 <= 0 or alpha < 0:
        raise ValueError("need nu2 > 0 and alpha >= 0")
    if alpha == 0.0 or t <= nu2 / alpha:
        return math.exp(-(t * t) / (2.0 * nu2))
    return math.exp(-t / (2.0 * alpha))


def _golden_section(fn, lo: float, hi: float, iters: int = 200) -> tuple[float, float]:
    """Golden-section minimum of a unimodal fn on [lo, hi]."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if b - a < 1e-14 * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
    return (c, fc) if fc <= fd else (d, fd)


def chernoff_numeric(log_mgf, t: float, b: float, grid_points: int = 512) -> float:
    """Numerical Chernoff bound exp(inf_{lambda in [0, b]} log MGF(lambda) - lambda t).

    Dense grid search refined by golden section around the best bracket;
    the result never exceeds exp of the objective at any probed lambda,
    and is capped at 1 when the infimum is nonnegative.
    """
    if b <= 0:
        raise ValueError("domain edge b must be positive")
    lams = np.linspace(0.0, b, grid_points)
    vals = np.array([log_mgf(l) - l * t for l in lams])
    i = int(np.argmin(vals))
    best = float(vals[i])
    lo = lams[max(i - 1, 0)]
    hi = lams[min(i + 1, grid_points - 1)]
    if hi > lo:
        _, refined = _golden_section(lambda l: log_mgf(l) - l * t, lo, hi)
        best = min(best, refined)
    return math.exp(min(best, 0.0))


def mgf_closed_forms(kind: str, lam: float) -> float:
    """Closed-form MGFs for the centered chi-square X^2 - 1 and the product X W.

    Returns e^{-lambda} (1 - 2 lambda)^{-1/2} for 'chi_sq_centered'
    (lambda < 1/2) and (1 - lambda^2)^{-1/2} for 'gauss_product'
    (|lambda| < 1).  Both equal 1 at lambda = 0 and match numerical
    quadrature; see the package README for the correction they embody.
    """
    if kind == "chi_sq_centered":
        if lam >= 0.5:
            raise DomainExceeded(f"chi_sq_centered MGF requires lambda < 1/2, got {lam}")
        return math.exp(-lam) / math.sqrt(1.0 - 2.0 * lam)
    if kind == "gauss_product":
        if abs(lam) >= 1.0:
            raise DomainExceeded(f"gauss_product MGF requires |lambda| < 1, got {lam}")
        return 1.0 / math.sqrt(1.0 - lam * lam)
    raise ValueError(f"unknown MGF kind {kind!r}")


@dataclass
class DominationCheck:
    """Result of verifying MGF(lambda) <= exp(nu^2 lambda^2 / 2) on a grid."""

    passed: bool
    min_slack: float
    at_lambda: float


def subexp_domination_check(
    kind: str, nu2: float, alpha: float, grid: np.ndarray | None = None, points: int = 1000
) -> DominationCheck:
    """Verify the claimed sub-exponential parameters dominate the closed-form MGF.

    The default grid spans the open interval (-1/alpha, 1/alpha) and skips
    lambda = 0, where both sides equal one exactly.  Reports the worst slack
    exp(nu^2 lambda^2/2) - MGF(lambda); negative slack anywhere fails.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if grid is None:
        grid = np.linspace(-1.0 / alpha, 1.0 / alpha, points + 2)[1:-1]
    grid = np.asarray(grid, dtype=float)
    slacks = np.array([math.exp(nu2 * l * l / 2.0) - mgf_closed_forms(kind, l) for l in grid])
    i = int(np.argmin(slacks))
    return DominationCheck(passed=bool(slacks[i] >= 0.0), min_slack=float(slacks[i]), at_lambda=float(grid[i]))


def scalar_error_bound(sigma_w: float, sigma_x: float, n: int, delta: float) -> BoundCertificate:
    """Scalar last-step OLS error bound 4 (sigma_w/sigma_x) sqrt(log(4/delta)/N).

    Holds with probability at least 1 - delta provided N >= 32 log(2/delta);
    the precondition is flagged, not enforced.
    """
    _check_delta(delta)
    if sigma_x <= 0:
        raise ValueError("sigma_x must be positive")
    if n < 1:
        raise ValueError("need n >= 1")
    value = 4.0 * (sigma_w / sigma_x) * math.sqrt(math.log(4.0 / delta) / n)
    need = 32.0 * math.log(2.0 / delta)
    ok = n >= need
    return BoundCertificate(
        value=value,
        delta=delta,
        source="scalar_lastpoint_error",
        precondition_ok=ok,
        violated_condition=None if ok else f"N >= 32 log(2/delta) = {need:.4g}",
        details={"required_n": need},
    )


def cross_term_norm_bound(
    norm_sigma_x: float, norm_sigma_w: float, n: int, dim_x: int, dim_w: int, delta: float
) -> BoundCertificate:
    """Spectral-norm bound on the cross term sum_i x_i w_i^T.

    4 |Sigma_x|^{1/2} |Sigma_w|^{1/2} sqrt(N (n+m) log(9/delta)), valid with
    probability 1 - delta once N >= (n+m) log(9/delta) / 2.
    """
    _check_delta(delta)
    if norm_sigma_x < 0 or norm_sigma_w < 0:
        raise ValueError("covariance norms must be nonnegative")
    log_term = math.log(9.0 / delta)
    value = 4.0 * math.sqrt(norm_sigma_x * norm_sigma_w) * math.sqrt(n * (dim_x + dim_w) * log_term)
    need = 0.5 * (dim_x + dim_w) * log_term
    ok = n >= need
    return BoundCertificate(
        value=value,
        delta=delta,
        source="cross_term_norm",
        precondition_ok=ok,
        violated_condition=None if ok else f"N >= (n+m) log(9/delta)/2 = {need:.4g}",
        details={"required_n": need},
    )


def min_eig_lower_bound(lambda_min_sigma: float, n: int, dim: int, delta: float) -> BoundCertificate:
    """High-probability lower bound lambda_min(sum x_i x_i^T) >= lambda_min(Sigma) N / 2.

    Valid at confidence 1 - 2 delta once N >= 24 n log(9/delta).  Unlike the
    error bounds, the value grows with N (it bounds accumulated excitation).
    """
    _check_delta(delta)
    if lambda_min_sigma < 0:
        raise ValueError("lambda_min must be nonnegative")
    need = 24.0 * dim * math.log(9.0 / delta)
    ok = n >= need
    return BoundCertificate(
        value=lambda_min_sigma * n / 2.0,
        delta=delta,
        source="min_eig_lower",
        precondition_ok=ok,
        violated_condition=None if ok else f"N >= 24 n log(9/delta) = {need:.4g}",
        details={"required_n": need},
    )


def matrix_error_bounds(
    lambda_min_sigma_x: float,
    sigma_w: float,
    sigma_u: float,
    n_x: int,
    n_u: int,
    n: int,
    delta: float,
) -> tuple[BoundCertificate, BoundCertificate]:
    """Batch OLS spectral error bounds for A_hat and B_hat.

    eps_A = 8 sigma_w lambda_min(Sigma_x)^{-1/2} sqrt((2 n_x + n_u) log(54/delta) / N)
    and eps_B replaces the eigenvalue factor by 1/sigma_u.  Both hold jointly
    with probability 1 - delta once N >= 24 (n_x + n_u) log(54/delta).
    """
    _check_delta(delta)
    if sigma_u == 0:
        raise ZeroSigmaU("eps_B requires sigma_u > 0")
    if lambda_min_sigma_x <= 0:
        raise ValueError("lambda_min(Sigma_x) must be positive")
    log_term = math.log(54.0 / delta)
    root = math.sqrt((2.0 * n_x + n_u) * log_term / n)
    need = 24.0 * (n_x + n_u) * log_term
    ok = n >= need
    violated = None if ok else f"N >= 24 (n_x+n_u) log(54/delta) = {need:.4g}"
    cert_a = BoundCertificate(
        value=8.0 * sigma_w / math.sqrt(lambda_min_sigma_x) * root,
        delta=delta,
        source="matrix_error_A",
        precondition_ok=ok,
        violated_condition=violated,
        details={"required_n": need},
    )
    cert_b = BoundCertificate(
        value=8.0 * sigma_w / sigma_u * root,
        delta=delta,
        source="matrix_error_B",
        precondition_ok=ok,
        violated_condition=violated,
        details={"required_n": need},
    )
    return cert_a, cert_b


def small_ball_tail(k: int, nu: float, p: float, horizon: int) -> tuple[float, float]:
    """Threshold and failure probability of the block small-ball concentration.

    For a (k, nu, p) BMSB process, sum phi_t^2 falls below
    (nu^2 p^2 / 8) k floor(T/k) with probability at most
    exp(-floor(T/k) p^2 / 8).
    """
    if k < 1 or k > horizon:
        raise InvalidBlock(f"need 1 <= k <= T, got k={k}, T={horizon}")
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    if nu <= 0:
        raise ValueError("nu must be positive")
    blocks = horizon // k
    threshold = (nu * nu * p * p / 8.0) * k * blocks
    prob = math.exp(-blocks * p * p / 8.0)
    return threshold, prob


def bmsb_margin_autonomous(
    a: np.ndarray, sigma_w: float, k: int, v: np.ndarray
) -> tuple[float, float]:
    """BMSB parameters of <x_t, v> for the autonomous Gaussian system.

    nu_v = sqrt(v^T Gamma_{ceil(k/2)} v) with Gamma_i = sigma_w^2
    sum_{j<i} A^j (A^j)^T, with the universal small-ball probability 3/20.
    """
    v = np.asarray(v, dtype=float).ravel()
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise NotUnitVector(f"|v| = {np.linalg.norm(v):.6g} != 1")
    if k < 1:
        raise InvalidBlock("block length k must be >= 1")
    i0 = math.ceil(k / 2)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    gamma = sigma_w**2 * gramian(a, np.eye(a.shape[0]), i0 - 1)
    return float(np.sqrt(v @ gamma @ v)), BMSB_P


def _chol_logdet(m: np.ndarray, name: str) -> float:
    try:
        chol = np.linalg.cholesky((m + m.T) / 2.0)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(f"{name} must be positive definite") from None
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def loewner_margin(lo: np.ndarray, hi: np.ndarray) -> float:
    """Minimum eigenvalue of sym(hi - lo); >= 0 means lo <= hi (Loewner)."""
    diff = np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float)
    return float(np.linalg.eigvalsh((diff + diff.T) / 2.0)[0])


def lwm_bound(
    k: int,
    p: float,
    gamma_min: np.ndarray,
    gamma_max: np.ndarray,
    sigma_w: float,
    dim: int,
    ell: int,
    horizon: int,
    delta: float,
) -> BoundCertificate:
    """Single-trajectory small-ball estimation error bound.

    (90 sigma_w / p) sqrt((ell + n log(10/p) + log det(Gamma_max
    Gamma_min^{-1}) + log(1/delta)) / (T lambda_min(Gamma_min))), valid at
    confidence 1 - 3 delta once T >= (10 k / p^2)(log(1/delta)
    + 2 n log(10/p) + log det).
    """
    _check_delta(delta)
    gamma_min = np.atleast_2d(np.asarray(gamma_min, dtype=float))
    gamma_max = np.atleast_2d(np.asarray(gamma_max, dtype=float))
    logdet_min = _chol_logdet(gamma_min, "Gamma_min")
    ordering = loewner_margin(gamma_min, gamma_max)
    scale = max(np.trace(gamma_min), np.trace(gamma_max))
    if ordering < -1e-10 * max(scale, 1.0):
        raise NotOrdered(f"Gamma_max >= Gamma_min fails (margin {ordering:.3e})")
    logdet_bar = _chol_logdet(gamma_max, "Gamma_max") - logdet_min
    lam_min = float(np.linalg.eigvalsh((gamma_min + gamma_min.T) / 2.0)[0])
    log_p = math.log(10.0 / p)
    numerator = ell + dim * log_p + logdet_bar + math.log(1.0 / delta)
    value = (90.0 * sigma_w / p) * math.sqrt(numerator / (horizon * lam_min))
    need = (10.0 * k / (p * p)) * (math.log(1.0 / delta) + 2.0 * dim * log_p + logdet_bar)
    ok = horizon >= need
    return BoundCertificate(
        value=value,
        delta=delta,
        source="small_ball_main",
        precondition_ok=ok,
        violated_condition=None if ok else f"T >= {need:.4g}",
        details={"required_t": need, "logdet_bar": logdet_bar},
    )


def choose_k_strictly_stable(tau: float, rho: float, sigma_w: float) -> int:
    """Block length for strictly stable A with |A^k| <= tau rho^k.

    k = ceil(log(2 sigma_w^2 tau^2 / (1 - rho^2)) / (1 - rho)), clamped to
    at least 1 (a log argument at or below one would give a meaningless
    nonpositive block).
    """
    if not 0.0 < rho < 1.0:
        raise UnstableRho(f"rho must lie in (0, 1), got {rho}")
    if tau < 1.0:
        raise ValueError("tau must be >= 1")
    arg = 2.0 * sigma_w**2 * tau**2 / (1.0 - rho * rho)
    if arg <= 1.0:
        return 1
    return max(1, math.ceil(math.log(arg) / (1.0 - rho)))


def choose_k_orthogonal(horizon: int, dim: int, delta: float) -> int:
    """Block length k = ceil(T / (n log(n/delta))) for orthogonal (marginal) A."""
    _check_delta(delta)
    denom = dim * math.log(dim / delta)
    if denom <= 0 or horizon < denom:
        raise InvalidBlock(f"need T >= n log(n/delta) = {denom:.4g}")
    return max(1, math.ceil(horizon / denom))
