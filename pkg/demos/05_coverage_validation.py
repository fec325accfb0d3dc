"""Validate the probabilistic claims empirically.

Every bound in the package promises "error <= bound with probability at
least 1 - delta".  The coverage harness replays seeded (simulate, estimate,
bound) replicates and measures how often that held; the rate fitter checks
the convergence exponents; the empirical tail falsifier probes the raw
concentration inequalities.
"""
import math

import numpy as np

import fsid
from fsid import montecarlo as mc

system = fsid.double_integrator()

# --- coverage of the batch matrix theorem across sample sizes ---------------
scenario = mc.matrix_theorem_scenario(system, horizon=5, delta=0.05, block="A")
reports = mc.coverage_experiment(scenario, grid=[64, 256, 1024], replicates=200, master_seed=1)
print(f"{'N':>6} {'coverage':>9} {'med err':>9} {'med bound':>10}")
for rep in reports:
    print(
        f"{rep.grid_value:>6} {rep.coverage:>9.3f}"
        f" {rep.error_quantiles[0]:>9.4f} {rep.bound_quantiles[0]:>10.4f}"
    )
print("fitted error decay exponent:", round(reports[0].slope, 3), "(theory: -1/2)")

# --- the marginally stable system learns faster ------------------------------
rot = fsid.rotation_system(0.5)
medians = []
for horizon in (1000, 10_000):
    errs = [
        fsid.ols_single_traj(
            fsid.simulate_single(rot, horizon, autonomous=True, seed=s),
            mode="autonomous",
            truth=rot.a,
        ).err_a
        for s in range(30)
    ]
    medians.append((horizon, float(np.median(errs))))
print("\northogonal-A median errors:", medians)

# --- falsification harness for a raw tail bound ------------------------------
# empirical exceedance of the mean of 100 standard normals vs the inverted
# Hoeffding radius at delta = 0.05
radius = fsid.hoeffding_radius(1.0, 100, 0.05)
freq = fsid.empirical_tail(
    lambda g: float(np.mean(g.normal(size=100))), [radius], replicates=5000, seed=2
)[0]
print(f"\nHoeffding: empirical exceedance {freq:.4f} <= delta 0.05")

# exact frequency for comparison: the mean is N(0, 1/100)
print("exact exceedance:", 0.5 * math.erfc(radius * 10 / math.sqrt(2)))
