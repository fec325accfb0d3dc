"""Monte Carlo coverage experiments, rate fitting, and numerical oracles.

The coverage engine runs seeded replicates of (simulate, estimate, bound)
triples and reports how often the bound contained the realized error;
every probabilistic claim in the bound modules is validated this way.
Replicate seeds derive from (master seed, scenario hash, replicate index),
so adding scenarios or grid points never perturbs existing results, and
parallel execution is bit-identical to sequential.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from . import certs, rng, theory
from .bootstrap import bootstrap_eps
from .errors import DomainExceeded, FsidError, IntegrationDivergence, NonPositiveValue
from .estimators import ols_batch, ols_scalar_lastpoint, ols_single_traj, spectral_norm
from .systems import (
    LtiSystem,
    simulate_batch,
    simulate_single,
    state_covariance,
)

# Tolerance granted to PSD containment checks, relative to matrix scale.
PSD_TOL = 1e-10

# Absolute slack in the covered comparison: noiseless scenarios have a zero
# bound and a round-off-level realized error, which must count as covered.
# Never material at statistical scales.
COVER_ATOL = 1e-12


@dataclass
class ReplicateRecord:
    replicate: int
    error: float
    bound: float
    covered: bool
    failure: str | None = None


@dataclass
class CoverageReport:
    """Aggregate of one grid point of a coverage experiment."""

    scenario: str
    grid_value: int
    replicates: int
    coverage: float
    delta: float
    error_quantiles: tuple[float, float, float]
    bound_quantiles: tuple[float, float, float]
    slope: float | None = None
    per_replicate: list[ReplicateRecord] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(1 for r in self.per_replicate if r.failure is not None)

    def to_json_dict(self) -> dict:
        med, q1, q3 = self.error_quantiles
        bmed, bq1, bq3 = self.bound_quantiles
        return {
            "scenario": self.scenario,
            "grid_value": self.grid_value,
            "replicates": self.replicates,
            "coverage": self.coverage,
            "delta": self.delta,
            "failures": self.failures,
            "error_median": med,
            "error_q1": q1,
            "error_q3": q3,
            "bound_median": bmed,
            "bound_q1": bq1,
            "bound_q3": bq3,
            "slope": self.slope,
        }


@dataclass
class CoverageScenario:
    """A named replicate recipe: (grid value, replicate seed) -> (error, bound)."""

    scenario_id: str
    grid_axis: str
    delta: float
    replicate_fn: Callable[[int, int], tuple[float, float]]


def _quantiles(values: list[float]) -> tuple[float, float, float]:
    if not values:
        return (math.nan, math.nan, math.nan)
    arr = np.asarray(values)
    med, q1, q3 = np.percentile(arr, [50.0, 25.0, 75.0])
    return float(med), float(q1), float(q3)


def coverage_experiment(
    scenario: CoverageScenario,
    grid: list[int],
    replicates: int,
    master_seed: int,
    threads: int = 1,
) -> list[CoverageReport]:
    """Run ``replicates`` seeded replicates at each grid value.

    Estimator or bound errors inside a replicate are recorded as failures
    (covered = False) without aborting the sweep.  When at least three grid
    points have positive median errors, the common log-log rate is fitted
    and attached to every report.
    """
    if not grid:
        raise ValueError("grid must be nonempty")
    if replicates < 1:
        raise ValueError("need at least one replicate")

    reports = []
    for grid_value in grid:
        point_tag = f"{scenario.scenario_id}|{scenario.grid_axis}={grid_value}"

        def run_one(r: int) -> ReplicateRecord:
            seed = rng.derive_seed(master_seed, point_tag, r)
            try:
                error, bound = scenario.replicate_fn(grid_value, seed)
            except FsidError as exc:
                return ReplicateRecord(r, math.nan, math.nan, False, type(exc).__name__)
            return ReplicateRecord(r, float(error), float(bound), bool(error <= bound + COVER_ATOL))

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                records = list(pool.map(run_one, range(replicates)))
        else:
            records = [run_one(r) for r in range(replicates)]

        ok = [r for r in records if r.failure is None]
        reports.append(
            CoverageReport(
                scenario=scenario.scenario_id,
                grid_value=int(grid_value),
                replicates=replicates,
                coverage=sum(r.covered for r in records) / replicates,
                delta=scenario.delta,
                error_quantiles=_quantiles([r.error for r in ok]),
                bound_quantiles=_quantiles([r.bound for r in ok]),
                per_replicate=records,
            )
        )

    fit_points = [
        (rep.grid_value, rep.error_quantiles[0])
        for rep in reports
        if math.isfinite(rep.error_quantiles[0]) and rep.error_quantiles[0] > 0
    ]
    if len(fit_points) >= 3:
        slope = rate_fit(fit_points).slope
        for rep in reports:
            rep.slope = slope
    return reports


@dataclass
class RateFit:
    slope: float
    stderr: float
    intercept: float


def rate_fit(points: list[tuple[float, float]]) -> RateFit:
    """Least-squares slope of log(error) against log(sample size)."""
    if len(points) < 3:
        raise NonPositiveValue("need at least 3 points for a rate fit")
    sizes = np.array([p[0] for p in points], dtype=float)
    errors = np.array([p[1] for p in points], dtype=float)
    if np.any(sizes <= 0) or np.any(errors <= 0):
        raise NonPositiveValue("rate fit requires positive sizes and errors")
    x = np.log(sizes)
    y = np.log(errors)
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = len(points) - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 else 0.0
    return RateFit(slope=float(coef[1]), stderr=stderr, intercept=float(coef[0]))


_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def mgf_quadrature(kind: str, lam: float) -> float:
    """MGF of the centered chi-square or Gaussian product by adaptive quadrature.

    This is the independent numerical route against which the closed forms
    are checked; the exponents are combined analytically inside one exp so
    the integrand never overflows inside the domain.
    """
    if kind == "chi_sq_centered":
        if lam >= 0.5:
            raise DomainExceeded(f"chi_sq_centered requires lambda < 1/2, got {lam}")
        integrand = lambda x: math.exp(lam * (x * x - 1.0) - 0.5 * x * x) * _INV_SQRT_2PI
    elif kind == "gauss_product":
        if abs(lam) >= 1.0:
            raise DomainExceeded(f"gauss_product requires |lambda| < 1, got {lam}")
        # E[e^{lam X W}] = E_X[e^{lam^2 X^2 / 2}] by conditioning on X
        integrand = lambda x: math.exp(0.5 * (lam * lam - 1.0) * x * x) * _INV_SQRT_2PI
    else:
        raise ValueError(f"unknown MGF kind {kind!r}")
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, est_err = quad(integrand, -np.inf, np.inf, epsabs=1e-12, epsrel=1e-12)
        except IntegrationWarning as exc:
            raise IntegrationDivergence(f"quadrature unstable at lambda={lam}: {exc}") from None
    if est_err > 1e-8:
        raise IntegrationDivergence(f"quadrature error estimate {est_err:.2e} at lambda={lam}")
    return value


def empirical_tail(
    statistic: Callable[[np.random.Generator], float],
    thresholds: np.ndarray,
    replicates: int,
    seed: int,
) -> np.ndarray:
    """Empirical exceedance frequencies P_hat(statistic >= t) on a threshold grid.

    ``statistic`` receives a fresh keyed generator per replicate.  Pair the
    output with a theoretical tail bound to falsify (or confirm) it.
    """
    stats = np.array(
        [statistic(rng.stream(seed, rng.TAG_TAIL, i)) for i in range(replicates)]
    )
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
    return np.array([float(np.mean(stats >= t)) for t in thresholds])


# ---------------------------------------------------------------------------
# Standard scenarios.  Each builder returns a CoverageScenario whose
# replicate_fn simulates fresh data, runs the estimator, and evaluates the
# bound under test.  The horizon below always counts transitions, so the
# covariate of the last-step estimators is x_{T-1}, whose exact covariance
# is state_covariance(sys, T-2).
# ---------------------------------------------------------------------------


def covariate_covariance(sys: LtiSystem, horizon: int) -> np.ndarray:
    """Exact covariance of the last-step covariate x_{T-1} (x_0 = 0)."""
    if horizon < 2:
        raise ValueError("last-step covariate needs horizon >= 2")
    return state_covariance(sys, horizon - 2)


def scalar_theorem_scenario(sys: LtiSystem, horizon: int, delta: float) -> CoverageScenario:
    """Scalar last-step theorem: |a_hat - a| vs the a priori bound (grid over N)."""
    sigma_x = math.sqrt(covariate_covariance(sys, horizon)[0, 0])
    a_true = float(sys.a[0, 0])

    def run(n: int, seed: int) -> tuple[float, float]:
        batch = simulate_batch(sys, n, horizon, seed)
        est = ols_scalar_lastpoint(batch, a_true=a_true)
        cert = theory.scalar_error_bound(sys.sigma_w, sigma_x, n, delta)
        return abs(est.error), cert.value

    return CoverageScenario(f"scalar_theorem(T={horizon})", "N", delta, run)


def matrix_theorem_scenario(
    sys: LtiSystem, horizon: int, delta: float, block: str = "A"
) -> CoverageScenario:
    """Batch matrix theorem for one block: |A_hat - A| or |B_hat - B| vs eps (grid over N)."""
    lam_min = float(np.linalg.eigvalsh(covariate_covariance(sys, horizon))[0])

    def run(n: int, seed: int) -> tuple[float, float]:
        batch = simulate_batch(sys, n, horizon, seed)
        est = ols_batch(batch, truth=sys)
        cert_a, cert_b = theory.matrix_error_bounds(
            lam_min, sys.sigma_w, sys.sigma_u, sys.n_x, sys.n_u, n, delta
        )
        return (est.err_a, cert_a.value) if block == "A" else (est.err_b, cert_b.value)

    return CoverageScenario(f"matrix_theorem_{block}(T={horizon})", "N", delta, run)


def ellipsoid_containment_scenario(sys: LtiSystem, horizon: int, delta: float) -> CoverageScenario:
    """PSD containment E E^T <= C^2 (Z^T Z)^{-1} (grid over N).

    Records the negated containment margin against a scaled PSD tolerance,
    so covered == (margin >= -tol).
    """

    def run(n: int, seed: int) -> tuple[float, float]:
        batch = simulate_batch(sys, n, horizon, seed)
        est = ols_batch(batch, truth=sys)
        z, _ = batch.last_transition()
        cert = certs.confidence_ellipsoid(z, sys.n_x, sys.sigma_w, delta)
        error_matrix = (est.theta_hat - sys.theta).T
        margin = cert.containment_margin(error_matrix)
        tol = PSD_TOL * max(cert.scale_c2, 1.0)
        return -margin, tol

    return CoverageScenario(f"ellipsoid_containment(T={horizon})", "N", delta, run)


def ellipsoid_block_scenario(
    sys: LtiSystem, horizon: int, delta: float, block: str = "A"
) -> CoverageScenario:
    """Ellipsoid corollary block bound vs the realized spectral error (grid over N)."""

    def run(n: int, seed: int) -> tuple[float, float]:
        batch = simulate_batch(sys, n, horizon, seed)
        est = ols_batch(batch, truth=sys)
        z, _ = batch.last_transition()
        cert = certs.confidence_ellipsoid(z, sys.n_x, sys.sigma_w, delta)
        eps_a, eps_b = certs.block_spectral_bounds(cert)
        return (est.err_a, eps_a) if block == "A" else (est.err_b, eps_b)

    return CoverageScenario(f"ellipsoid_block_{block}(T={horizon})", "N", delta, run)


def single_traj_scenario(sys: LtiSystem, alpha: float, delta: float) -> CoverageScenario:
    """Single-trajectory certificate: |Theta_hat - Theta_*| vs the bound (grid over T).

    Replicates whose data fail the ordering condition raise OrderingViolated
    and surface as failure records, matching the certify-then-exclude
    protocol.
    """

    def run(horizon: int, seed: int) -> tuple[float, float]:
        traj = simulate_single(sys, horizon, autonomous=False, seed=seed)
        est = ols_single_traj(traj, mode="controlled", truth=sys)
        z, _ = traj.regressors("controlled")
        cert = certs.single_traj_cert(z, est.b_hat, sys.sigma_u, sys.sigma_w, alpha, delta)
        return spectral_norm(est.theta_hat - sys.theta), cert.value

    return CoverageScenario(f"single_traj(alpha={alpha})", "T", delta, run)


def snm_scenario(a: float, sigma_w: float, v: float, delta: float) -> CoverageScenario:
    """Any-time validity of the self-normalized bound on a scalar AR(1) (grid over T).

    Records max_t statistic/radius^2; covered means the ratio never
    exceeded one at any time up to the horizon.
    """
    sys = LtiSystem.scalar(a, sigma_w=sigma_w, sigma_u=0.0)

    def run(horizon: int, seed: int) -> tuple[float, float]:
        traj = simulate_single(sys, horizon, autonomous=True, seed=seed)
        x = traj.states[:, 0]
        w = x[1:] - a * x[:-1]
        s = np.cumsum(x[:-1] * w)
        v_bar = v + np.cumsum(x[:-1] ** 2)
        stat = s * s / v_bar
        radius2 = 2.0 * sigma_w**2 * (0.5 * np.log(v_bar / v) + math.log(1.0 / delta))
        return float(np.max(stat / radius2)), 1.0

    return CoverageScenario(f"snm(a={a},V={v})", "T", delta, run)


def bootstrap_scenario(
    sys: LtiSystem,
    delta: float,
    trials: int,
    horizon: int | None = None,
    block: str = "A",
) -> CoverageScenario:
    """Outer-loop coverage of the bootstrap percentile (grid over N).

    Each replicate simulates real data, fits the pooled estimator, runs the
    bootstrap from the fit, and checks the *true* deviation against the
    bootstrap eps.  horizon=None sets the data horizon equal to N.
    """

    def run(n: int, seed: int) -> tuple[float, float]:
        t = n if horizon is None else horizon
        batch = simulate_batch(sys, n, t, seed)
        est = ols_batch(batch, truth=sys, pooled=True)
        result = bootstrap_eps(
            batch,
            est.a_hat,
            est.b_hat,
            sys.sigma_w,
            sys.sigma_u,
            trials=trials,
            delta=delta,
            seed=rng.derive_seed(seed, "bootstrap-trials"),
        )
        if block == "A":
            return est.err_a, result.eps_a
        return est.err_b, result.eps_b

    label = "T=N" if horizon is None else f"T={horizon}"
    return CoverageScenario(f"bootstrap_{block}(M={trials},{label})", "N", delta, run)
