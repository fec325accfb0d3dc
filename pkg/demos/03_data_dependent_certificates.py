"""Data-dependent certificates: what you can certify from the data alone.

The a priori bounds need the true system's covariances.  These don't: the
confidence ellipsoid and its block corollary work from the recorded
covariates, and the single-trajectory certificate combines the
self-normalized martingale radius with an observed excitation check.
"""
import numpy as np

import fsid
from fsid import certs

system = fsid.double_integrator()

# --- independent samples: confidence ellipsoid -----------------------------
batch = fsid.simulate_batch(system, n_experiments=500, horizon=6, seed=3)
est = fsid.ols_batch(batch, truth=system)
z, _ = batch.last_transition()

ellipsoid = fsid.confidence_ellipsoid(z, system.n_x, system.sigma_w, delta=0.05)
print("C^2:", ellipsoid.scale_c2)
print("infinite directions:", ellipsoid.infinite_directions)

eps_a, eps_b = fsid.block_spectral_bounds(ellipsoid)
print("certified: |A_hat - A| <=", eps_a, " realized:", est.err_a)
print("certified: |B_hat - B| <=", eps_b, " realized:", est.err_b)

error_matrix = (est.theta_hat - system.theta).T
print("containment margin (>= 0 means contained):", ellipsoid.containment_margin(error_matrix))

# --- self-normalized martingale radius --------------------------------------
state = certs.SnmState(v=np.eye(3), v_t=z.T @ z, r2=system.sigma_w**2)
print("\nself-normalized squared radius:", fsid.snm_radius(state, delta=0.05))

# --- single trajectory -------------------------------------------------------
traj = fsid.simulate_single(system, horizon=2000, seed=5)
single = fsid.ols_single_traj(traj, mode="controlled", truth=system)
zt, _ = traj.regressors("controlled")

# alpha trades constant against applicability: larger alpha loosens the
# sqrt(1 + alpha) factor but makes V <= alpha V_T easier to satisfy.
for alpha in (1.0, 2.0, 4.0):
    try:
        cert = fsid.single_traj_cert(
            zt, single.b_hat, system.sigma_u, system.sigma_w, alpha=alpha, delta=0.05
        )
        print(
            f"alpha={alpha}: bound {cert.value:.4f}"
            f" (ordering margin {cert.details['ordering_margin']:.1f},"
            f" realized {fsid.spectral_norm(single.theta_hat - system.theta):.4f})"
        )
    except fsid.FsidError as exc:
        print(f"alpha={alpha}: not certified ({type(exc).__name__})")
