import numpy as np
import pytest

from fsid import (
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
from fsid.errors import DimensionMismatch
from fsid.systems import (
    batch_from_json,
    batch_to_json,
    load_batch_csv,
    load_single_csv,
    save_batch_csv,
    save_single_csv,
    single_from_json,
    single_to_json,
)
from conftest import gramian_bruteforce

DI = double_integrator()


class TestGramian:
    def test_nilpotent_scalar(self):
        # only the t=0 term survives
        assert gramian([[0.0]], [[1.0]], 3) == pytest.approx(1.0, abs=0)

    def test_scalar_geometric_sum(self):
        # 1 + 0.25 + 0.0625 by hand
        assert gramian([[0.5]], [[1.0]], 2)[0, 0] == pytest.approx(1.3125, abs=1e-15)

    def test_double_integrator_example(self):
        expected = np.array([[0.05, 0.3], [0.3, 3.0]])
        got = gramian(DI.a, DI.b, 2)
        assert np.allclose(got, expected, atol=1e-14)
        assert np.allclose(got, gramian_bruteforce(DI.a, DI.b, 2), atol=1e-13)

    @pytest.mark.parametrize("horizon", [0, 1, 3, 7])
    def test_matches_bruteforce_random(self, np_rng, horizon):
        for _ in range(5):
            a = np_rng.normal(size=(3, 3)) * 0.4
            b = np_rng.normal(size=(3, 2))
            got = gramian(a, b, horizon)
            assert np.allclose(got, gramian_bruteforce(a, b, horizon), rtol=1e-12, atol=1e-12)

    def test_symmetric_and_monotone(self, np_rng):
        for _ in range(10):
            a = np_rng.normal(size=(3, 3)) * 0.5
            b = np_rng.normal(size=(3, 1))
            horizon = int(np_rng.integers(0, 6))
            g0 = gramian(a, b, horizon)
            g1 = gramian(a, b, horizon + 1)
            assert np.array_equal(g0, g0.T)
            increment = g1 - g0
            assert np.linalg.eigvalsh(increment).min() >= -1e-12 * max(np.trace(g1), 1.0)

    def test_scalar_limit(self):
        # geometric series limit 1/(1-a^2) at a = 0.5
        assert abs(gramian([[0.5]], [[1.0]], 200)[0, 0] - 4.0 / 3.0) < 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            gramian(np.eye(2), np.ones((3, 1)), 2)


class TestStateCovariance:
    def test_scalar_a0(self):
        sys_ = LtiSystem.scalar(0.0, 1.0, 1.0)
        for horizon in (0, 2, 9):
            assert state_covariance(sys_, horizon)[0, 0] == pytest.approx(2.0)

    def test_scalar_geometric(self):
        sys_ = LtiSystem.scalar(0.9, 1.0, 1.0)
        assert state_covariance(sys_, 1)[0, 0] == pytest.approx(3.62, abs=1e-14)

    def test_double_integrator_composition(self):
        got = state_covariance(DI, 2)
        expected = 1.0 * gramian_bruteforce(DI.a, DI.b, 2) + 0.01 * gramian_bruteforce(
            DI.a, np.eye(2), 2
        )
        assert np.allclose(got, expected, rtol=1e-13)

    def test_joint_covariance_blocks(self):
        joint = joint_covariance(DI, 3)
        assert joint.shape == (3, 3)
        assert np.allclose(joint[:2, :2], state_covariance(DI, 3))
        assert joint[2, 2] == pytest.approx(DI.sigma_u**2)
        assert np.all(joint[:2, 2] == 0) and np.all(joint[2, :2] == 0)

    def test_noise_gramian_counts_steps(self):
        # Gamma_i sums i terms: Gamma_1 = sigma_w^2 I
        sys_ = LtiSystem.scalar(0.5, 2.0, 0.0)
        assert noise_gramian(sys_, 1)[0, 0] == pytest.approx(4.0)
        assert noise_gramian(sys_, 2)[0, 0] == pytest.approx(4.0 * 1.25)


class TestSimulateBatch:
    def test_unforced_zero(self):
        sys_ = LtiSystem(DI.a, DI.b, 0.0, 0.0)
        batch = simulate_batch(sys_, 4, 5, seed=3)
        assert np.all(batch.states == 0.0)

    def test_deterministic(self):
        b1 = simulate_batch(DI, 6, 4, seed=11)
        b2 = simulate_batch(DI, 6, 4, seed=11)
        assert np.array_equal(b1.states, b2.states)
        assert np.array_equal(b1.inputs, b2.inputs)
        b3 = simulate_batch(DI, 6, 4, seed=12)
        assert not np.allclose(b1.states, b3.states)

    def test_shapes_and_zero_start(self):
        batch = simulate_batch(DI, 7, 5, seed=0)
        assert batch.states.shape == (7, 6, 2)
        assert batch.inputs.shape == (7, 5, 1)
        assert np.all(batch.states[:, 0] == 0.0)
        assert batch.horizon == 5 and batch.n_experiments == 7

    def test_final_state_variance_scalar(self):
        # a = 0: x_T = u_{T-1} + w_{T-1}, variance 2
        sys_ = LtiSystem.scalar(0.0, 1.0, 1.0)
        batch = simulate_batch(sys_, 100_000, 3, seed=5)
        var = float(np.var(batch.states[:, -1, 0]))
        assert abs(var - 2.0) < 0.04

    def test_covariate_moments_match_covariance(self):
        # stacked (x_{T-1}, u_{T-1}) second moments vs the exact blocks,
        # within 3 standard errors over 1e5 experiments
        sys_ = LtiSystem.scalar(0.9, 1.0, 1.0)
        n, horizon = 100_000, 3
        batch = simulate_batch(sys_, n, horizon, seed=8)
        z, _ = batch.last_transition()
        emp = z.T @ z / n
        sx = state_covariance(sys_, horizon - 2)[0, 0]
        su = sys_.sigma_u**2
        se_xx = sx * np.sqrt(2.0 / n)
        se_uu = su * np.sqrt(2.0 / n)
        se_xu = np.sqrt(sx * su / n)
        assert abs(emp[0, 0] - sx) < 3 * se_xx
        assert abs(emp[1, 1] - su) < 3 * se_uu
        assert abs(emp[0, 1]) < 3 * se_xu

    def test_transition_identity(self):
        batch = simulate_batch(DI, 5, 6, seed=2)
        w = batch.noise(DI.a, DI.b)
        rebuilt = batch.states[:, :-1] @ DI.a.T + batch.inputs @ DI.b.T + w
        assert np.allclose(rebuilt, batch.states[:, 1:], atol=1e-15)


class TestSimulateSingle:
    def test_zero_noise_zero_trajectory(self):
        sys_ = LtiSystem(DI.a, DI.b, 0.0, 0.0)
        traj = simulate_single(sys_, 20, autonomous=True, seed=4)
        assert np.all(traj.states == 0.0)

    def test_deterministic(self):
        t1 = simulate_single(DI, 30, seed=9)
        t2 = simulate_single(DI, 30, seed=9)
        assert np.array_equal(t1.states, t2.states)
        assert np.array_equal(t1.inputs, t2.inputs)

    def test_autonomous_drops_inputs(self):
        traj = simulate_single(DI, 10, autonomous=True, seed=1)
        assert traj.inputs is None
        assert traj.states.shape == (11, 2)

    def test_orthogonal_energy_growth(self):
        # Gamma_t = sigma_w^2 t I for orthogonal A, so |x_t|^2 / t has mean 2
        traj = simulate_single(rotation_system(0.7), 10_000, autonomous=True, seed=14)
        t = np.arange(5_000, 10_001)
        ratio = np.mean(np.sum(traj.states[t] ** 2, axis=1) / t)
        assert abs(ratio - 2.0) < 0.2

    def test_scalar_filter_path_matches_recursion(self):
        sys_ = LtiSystem.scalar(0.7, 0.5, 1.0)
        traj = simulate_single(sys_, 40, seed=21)
        w = traj.states[1:, 0] * 0.0
        x = 0.0
        drive = traj.inputs[:, 0] * 1.0  # b = 1
        # recover w from the recorded transition, then re-run the recursion
        w = traj.states[1:, 0] - 0.7 * traj.states[:-1, 0] - drive
        xs = [0.0]
        for k in range(40):
            x = 0.7 * x + drive[k] + w[k]
            xs.append(x)
        assert np.allclose(traj.states[:, 0], xs, atol=1e-12)


class TestTypesAndIo:
    def test_batch_invariants(self):
        with pytest.raises(DimensionMismatch):
            TrajectoryBatch(states=np.zeros((2, 5, 1)), inputs=np.zeros((2, 3, 1)))
        with pytest.raises(DimensionMismatch):
            TrajectoryBatch(states=np.zeros((2, 5, 1)), inputs=np.zeros((3, 4, 1)))

    def test_single_invariants(self):
        with pytest.raises(DimensionMismatch):
            SingleTrajectory(states=np.zeros((5, 2)), inputs=np.zeros((3, 1)))

    def test_batch_csv_roundtrip(self, tmp_path):
        batch = simulate_batch(DI, 4, 6, seed=17)
        path = tmp_path / "batch.csv"
        save_batch_csv(batch, path)
        header = path.read_text().splitlines()[0]
        assert header == "experiment,t,x_0,x_1,u_0"
        loaded = load_batch_csv(path)
        assert np.array_equal(loaded.states, batch.states)
        assert np.array_equal(loaded.inputs, batch.inputs)

    def test_batch_json_roundtrip(self):
        batch = simulate_batch(DI, 3, 4, seed=23)
        payload = batch_to_json(batch, DI)
        assert payload["seed"] == 23
        assert payload["system"]["sigma_w"] == DI.sigma_w
        loaded = batch_from_json(payload)
        assert np.array_equal(loaded.states, batch.states)

    def test_single_csv_roundtrip(self, tmp_path):
        traj = simulate_single(DI, 12, seed=31)
        path = tmp_path / "single.csv"
        save_single_csv(traj, path)
        loaded = load_single_csv(path)
        assert np.array_equal(loaded.states, traj.states)
        assert np.array_equal(loaded.inputs, traj.inputs)

    def test_single_json_roundtrip_autonomous(self):
        traj = simulate_single(DI, 8, autonomous=True, seed=37)
        loaded = single_from_json(single_to_json(traj, DI))
        assert np.array_equal(loaded.states, traj.states)
        assert loaded.inputs is None

    def test_system_validation(self):
        with pytest.raises(DimensionMismatch):
            LtiSystem(np.zeros((2, 3)), np.zeros((2, 1)), 1.0, 1.0)
        with pytest.raises(ValueError):
            LtiSystem.scalar(0.5, sigma_w=-1.0)
