"""Simulate an LTI system and identify it by least squares.

Walks the basic loop: define the double-integrator benchmark, roll out a
batch of independent experiments, fit [A B] from the final transition of
each experiment, and compare against the pooled fit that uses every
transition.
"""
import numpy as np

import fsid

system = fsid.double_integrator()  # A = [[1, .1], [0, 1]], B = [0; 1], sw=0.1, su=1
print("true A:\n", system.a)
print("true B:\n", system.b)
print("spectral radius:", system.spectral_radius())

# N independent experiments, T transitions each, from x_0 = 0.
batch = fsid.simulate_batch(system, n_experiments=500, horizon=6, seed=7)
print("\nbatch:", batch.n_experiments, "experiments x", batch.horizon, "transitions")

# The analysis-friendly estimator uses only the last transition of each
# experiment, so its covariates are independent across experiments.
est = fsid.ols_batch(batch, truth=system)
print("\nlast-step estimate of A:\n", np.round(est.a_hat, 4))
print("spectral errors |A_hat - A|, |B_hat - B|:", est.err_a, est.err_b)

# Pooling every transition reuses much more data (this is the objective the
# bootstrap refits); the trade is that covariates are serially dependent.
pooled = fsid.ols_batch(batch, truth=system, pooled=True)
print("pooled errors:                            ", pooled.err_a, pooled.err_b)

# A single long rollout feeds the single-trajectory theory instead.
traj = fsid.simulate_single(system, horizon=3000, seed=11)
single = fsid.ols_single_traj(traj, mode="controlled", truth=system)
print("single-trajectory errors:                 ", single.err_a, single.err_b)

# The exact covariance of the last-step covariate comes from the
# controllability Gramians; compare it with the empirical second moment.
from fsid.montecarlo import covariate_covariance

z, _ = batch.last_transition()
print("\nexact covariate covariance:\n", covariate_covariance(system, batch.horizon))
print("empirical:\n", np.round(z[:, :2].T @ z[:, :2] / batch.n_experiments, 4))
