"""fsid: finite-sample identification of fully observed LTI systems.

Simulation of x_{t+1} = A x_t + B u_t + w_t, least-squares estimators,
a priori and data-dependent error bounds, bootstrap error estimation, and
a Monte Carlo harness that validates every bound's coverage claim.
"""

from .bootstrap import BootstrapResult, bootstrap_eps
from .certs import (
    EllipsoidCertificate,
    SnmState,
    block_spectral_bounds,
    confidence_ellipsoid,
    single_traj_cert,
    single_traj_radius,
    snm_radius,
)
from .errors import FsidError
from .estimators import (
    Estimate,
    ScalarEstimate,
    ols_batch,
    ols_scalar_lastpoint,
    ols_single_traj,
    spectral_norm,
)
from .montecarlo import (
    CoverageReport,
    CoverageScenario,
    coverage_experiment,
    empirical_tail,
    mgf_quadrature,
    rate_fit,
)
from .systems import (
    LtiSystem,
    SingleTrajectory,
    TrajectoryBatch,
    double_integrator,
    gramian,
    joint_covariance,
    noise_gramian,
    rotation_system,
    simulate_batch,
    simulate_single,
    state_covariance,
)
from .theory import (
    BoundCertificate,
    TailParams,
    bmsb_margin_autonomous,
    chernoff_numeric,
    choose_k_orthogonal,
    choose_k_strictly_stable,
    cross_term_norm_bound,
    hoeffding_radius,
    lwm_bound,
    matrix_error_bounds,
    mgf_closed_forms,
    min_eig_lower_bound,
    scalar_error_bound,
    small_ball_tail,
    subexp_domination_check,
    subexp_tail,
)

__version__ = "0.1.0"
