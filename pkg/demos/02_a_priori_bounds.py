"""Evaluate the a priori (data-independent) error bounds.

Shows the tail-bound calculus (Hoeffding radii, sub-exponential tails,
numerical Chernoff) and the finite-sample error bounds for the scalar,
batch-matrix, and single-trajectory estimators.
"""
import math

import numpy as np

import fsid

# --- tail calculus ---------------------------------------------------------
print("Hoeffding radius, N=100, delta=0.05:", fsid.hoeffding_radius(1.0, 100, 0.05))

# A squared Gaussian is sub-exponential with parameters (4, 4): Gaussian-like
# tail for small deviations, exponential beyond nu^2/alpha.
print("subexp tail at t=0.5 / t=2:", fsid.subexp_tail(4, 4, 0.5), fsid.subexp_tail(4, 4, 2.0))

# The generic Chernoff machinery reproduces the Gaussian closed form.
gauss = fsid.chernoff_numeric(lambda lam: lam * lam / 2.0, t=1.0, b=8.0)
print("numerical Chernoff vs exp(-1/2):", gauss, math.exp(-0.5))

# Closed-form MGFs and the domination check behind the (4,4) / (2,sqrt 2)
# sub-exponential claims.
print("MGF X^2-1 at 0.2:", fsid.mgf_closed_forms("chi_sq_centered", 0.2))
print("domination (4,4):", fsid.subexp_domination_check("chi_sq_centered", 4, 4))

# --- bound formulas --------------------------------------------------------
system = fsid.double_integrator()
horizon, n, delta = 5, 1000, 0.05

sigma_x2 = fsid.state_covariance(fsid.LtiSystem.scalar(0.8, 1.0, 1.0), horizon - 2)[0, 0]
cert = fsid.scalar_error_bound(1.0, math.sqrt(sigma_x2), n, delta)
print("\nscalar bound:", cert.value, "| precondition ok:", cert.precondition_ok)

from fsid.montecarlo import covariate_covariance

lam_min = float(np.linalg.eigvalsh(covariate_covariance(system, horizon))[0])
eps_a, eps_b = fsid.matrix_error_bounds(lam_min, 0.1, 1.0, 2, 1, n, delta)
print("matrix bounds eps_A, eps_B:", eps_a.value, eps_b.value)
print("shared sample-size requirement:", eps_a.details["required_n"])

# --- single-trajectory theory ---------------------------------------------
# Block martingale small-ball margin of the autonomous system along a
# direction, then the main estimation bound with Gamma_min = Gamma_max.
rot = fsid.rotation_system(0.5)
nu, p = fsid.bmsb_margin_autonomous(rot.a, 1.0, k=6, v=[1.0, 0.0])
print("\nBMSB margin (orthogonal A, k=6):", nu, "with small-ball probability", p)
threshold, tail = fsid.small_ball_tail(k=6, nu=nu, p=p, horizon=10_000)
print("excitation threshold / failure prob:", threshold, tail)

gamma = fsid.noise_gramian(rot, 3)
cert = fsid.lwm_bound(6, p, gamma, 10 * gamma, 1.0, 2, 2, 10_000, 0.05)
print("single-trajectory bound:", cert.value, "| needs T >=", cert.details["required_t"])

print("\nblock length, strictly stable rho=0.9:", fsid.choose_k_strictly_stable(1.0, 0.9, 1.0))
print("block length, orthogonal T=1e4:", fsid.choose_k_orthogonal(10_000, 2, 0.1))
