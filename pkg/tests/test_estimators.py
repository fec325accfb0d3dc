import numpy as np
import pytest

from fsid import (
    LtiSystem,
    SingleTrajectory,
    TrajectoryBatch,
    double_integrator,
    ols_batch,
    ols_scalar_lastpoint,
    ols_single_traj,
    simulate_batch,
    simulate_single,
    spectral_norm,
)
from fsid.errors import SingularGram, ZeroDenominator

DI = double_integrator()


def hand_batch(pairs):
    """Batch whose final transition is the given (x, u, x_next) scalar triples."""
    states = np.array([[[x], [xn]] for x, _, xn in pairs])
    inputs = np.array([[[u]] for _, u, _ in pairs])
    return TrajectoryBatch(states=states, inputs=inputs)


class TestScalarLastpoint:
    def test_hand_oracle(self):
        # one-dimensional normal equation: (1*0.7 + 2*1.2) / (1 + 4)
        batch = hand_batch([(1.0, 0.0, 0.7), (2.0, 0.0, 1.2)])
        est = ols_scalar_lastpoint(batch)
        assert est.a_hat == pytest.approx(0.62, abs=1e-15)
        assert est.gram == pytest.approx(5.0)

    def test_noiseless_recovery(self):
        sys_ = LtiSystem.scalar(0.7, 0.0, 1.0)
        batch = simulate_batch(sys_, 25, 3, seed=2)
        est = ols_scalar_lastpoint(batch, a_true=0.7)
        assert abs(est.error) < 1e-12

    def test_zero_denominator(self):
        batch = hand_batch([(0.0, 1.0, 1.0), (0.0, -1.0, -1.0)])
        with pytest.raises(ZeroDenominator):
            ols_scalar_lastpoint(batch)

    def test_error_identity(self):
        sys_ = LtiSystem.scalar(0.8, 1.0, 1.0)
        batch = simulate_batch(sys_, 500, 3, seed=3)
        est = ols_scalar_lastpoint(batch, a_true=0.8)
        z, y = batch.last_transition()
        x, u = z[:, 0], z[:, 1]
        w = y[:, 0] - 0.8 * x - u
        assert est.error == pytest.approx(float(x @ w) / float(x @ x), rel=1e-10)


class TestBatch:
    def test_noiseless_exact(self):
        sys_ = LtiSystem(DI.a, DI.b, 0.0, 1.0)
        batch = simulate_batch(sys_, 50, 5, seed=4)
        est = ols_batch(batch, truth=sys_)
        assert est.err_a < 1e-10
        assert est.err_b < 1e-10

    def test_normal_equations_residual(self):
        batch = simulate_batch(DI, 300, 5, seed=5)
        est = ols_batch(batch)
        z, y = batch.last_transition()
        resid = z.T @ (y - z @ est.theta_hat.T)
        assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(z) * np.linalg.norm(y)

    def test_error_identity(self):
        batch = simulate_batch(DI, 400, 5, seed=6)
        est = ols_batch(batch, truth=DI)
        lhs = est.theta_hat - DI.theta
        rhs = np.linalg.solve(est.gram, est.cross).T
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(lhs)

    def test_permutation_invariance(self):
        batch = simulate_batch(DI, 64, 4, seed=7)
        perm = np.random.default_rng(0).permutation(64)
        shuffled = TrajectoryBatch(states=batch.states[perm], inputs=batch.inputs[perm])
        t1 = ols_batch(batch).theta_hat
        t2 = ols_batch(shuffled).theta_hat
        assert np.allclose(t1, t2, rtol=1e-10)

    def test_singular_gram(self):
        batch = TrajectoryBatch(states=np.zeros((4, 3, 2)), inputs=np.zeros((4, 2, 1)))
        with pytest.raises(SingularGram):
            ols_batch(batch)

    def test_pooled_uses_all_transitions(self):
        batch = simulate_batch(DI, 10, 6, seed=8)
        z, y = batch.pooled_transitions()
        assert z.shape == (60, 3) and y.shape == (60, 2)
        est = ols_batch(batch, pooled=True)
        resid = z.T @ (y - z @ est.theta_hat.T)
        assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(z) * np.linalg.norm(y)

    def test_reported_norms_match_svd_oracle(self):
        batch = simulate_batch(DI, 200, 5, seed=9)
        est = ols_batch(batch, truth=DI)
        assert est.err_a == pytest.approx(
            np.linalg.svd(est.a_hat - DI.a, compute_uv=False)[0], abs=1e-10
        )
        assert est.err_b == pytest.approx(
            np.linalg.svd(est.b_hat - DI.b, compute_uv=False)[0], abs=1e-10
        )


class TestSingleTrajectory:
    def test_noiseless_recovery_with_nonzero_start(self):
        # hand-built trajectory: x_{t+1} = A x_t exactly from x_0 = (1, 0.5)
        a = np.array([[0.9, 0.1], [0.0, 0.8]])
        states = [np.array([1.0, 0.5])]
        for _ in range(6):
            states.append(a @ states[-1])
        traj = SingleTrajectory(states=np.array(states))
        est = ols_single_traj(traj, mode="autonomous", truth=a)
        assert est.err_a < 1e-10

    def test_singular_gram_zero_trajectory(self):
        traj = SingleTrajectory(states=np.zeros((8, 2)))
        with pytest.raises(SingularGram):
            ols_single_traj(traj, mode="autonomous")

    def test_controlled_mode_shapes(self):
        traj = simulate_single(DI, 200, seed=10)
        est = ols_single_traj(traj, mode="controlled", truth=DI)
        assert est.theta_hat.shape == (2, 3)
        assert est.cross.shape == (3, 2)
        assert est.err_a is not None and est.err_b is not None

    def test_error_identity(self):
        traj = simulate_single(DI, 500, seed=11)
        est = ols_single_traj(traj, mode="controlled", truth=DI)
        lhs = est.theta_hat - DI.theta
        rhs = np.linalg.solve(est.gram, est.cross).T
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(lhs)

    def test_scalar_autonomous_consistency(self):
        # |a_hat - 0.5| <= 0.05 in at least 95% of 200 seeded runs at T = 1e4
        sys_ = LtiSystem.scalar(0.5, 1.0, 0.0)
        hits = 0
        for seed in range(200):
            traj = simulate_single(sys_, 10_000, autonomous=True, seed=seed)
            est = ols_single_traj(traj, mode="autonomous")
            hits += abs(est.theta_hat[0, 0] - 0.5) <= 0.05
        assert hits >= 190


class TestSpectralNorm:
    def test_matches_svd(self, np_rng):
        for shape in [(3, 3), (2, 5), (4, 2), (1, 1)]:
            for _ in range(20):
                m = np_rng.normal(size=shape)
                assert spectral_norm(m) == pytest.approx(
                    np.linalg.svd(m, compute_uv=False)[0], abs=1e-9
                )

    def test_matches_gram_eigenvalue_oracle(self, np_rng):
        for _ in range(20):
            m = np_rng.normal(size=(3, 3))
            lam_max = np.linalg.eigvalsh(m.T @ m)[-1]
            assert spectral_norm(m) == pytest.approx(np.sqrt(lam_max), abs=1e-9)

    def test_zero_matrix(self):
        assert spectral_norm(np.zeros((3, 2))) == 0.0

    def test_symmetric_gap_free(self):
        # equal top singular values converge immediately in value
        assert spectral_norm(np.diag([2.0, -2.0, 1.0])) == pytest.approx(2.0, abs=1e-10)
