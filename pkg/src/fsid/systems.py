"""Ground-truth LTI systems, Gramians, state covariances, and simulation.

The system is x_{t+1} = A x_t + B u_t + w_t with w_t ~ N(0, sigma_w^2 I)
and excitation u_t ~ N(0, sigma_u^2 I).  All simulations start from
x_0 = 0 and are deterministic functions of an explicit seed: every
experiment draws its noise from its own keyed stream, so batches are
reproducible independent of execution order.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from . import rng
from .errors import DimensionMismatch
from .serialize import fmt17


@dataclass(frozen=True)
class LtiSystem:
    """System matrices (A, B) with noise scales (sigma_w, sigma_u).

    sigma_w = 0 disables process noise; it is degenerate for estimation
    but supported so falsification experiments can run noiseless systems.
    """

    a: np.ndarray
    b: np.ndarray
    sigma_w: float
    sigma_u: float

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.asarray(self.b, dtype=float)
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        if a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"A must be square, got {a.shape}")
        if b.shape[0] != a.shape[0]:
            raise DimensionMismatch(f"B has {b.shape[0]} rows, expected {a.shape[0]}")
        if self.sigma_w < 0:
            raise ValueError("sigma_w must be nonnegative")
        if self.sigma_u < 0:
            raise ValueError("sigma_u must be nonnegative")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sigma_w", float(self.sigma_w))
        object.__setattr__(self, "sigma_u", float(self.sigma_u))

    @property
    def n_x(self) -> int:
        return self.a.shape[0]

    @property
    def n_u(self) -> int:
        return self.b.shape[1]

    @property
    def theta(self) -> np.ndarray:
        """True parameter [A B] as one n_x x (n_x + n_u) matrix."""
        return np.hstack([self.a, self.b])

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.a))))

    @classmethod
    def scalar(cls, a: float, sigma_w: float = 1.0, sigma_u: float = 1.0) -> "LtiSystem":
        return cls(np.array([[a]]), np.array([[1.0]]), sigma_w, sigma_u)


def double_integrator(sigma_w: float = 0.1, sigma_u: float = 1.0) -> LtiSystem:
    """The discrete double integrator benchmark (dt = 0.1)."""
    return LtiSystem(np.array([[1.0, 0.1], [0.0, 1.0]]), np.array([[0.0], [1.0]]), sigma_w, sigma_u)


def rotation_system(angle: float, sigma_w: float = 1.0) -> LtiSystem:
    """Marginally stable 2-D rotation (orthogonal A)."""
    c, s = np.cos(angle), np.sin(angle)
    return LtiSystem(np.array([[c, -s], [s, c]]), np.array([[0.0], [1.0]]), sigma_w, 0.0)


@dataclass(frozen=True)
class TrajectoryBatch:
    """N independent experiments: states x_0..x_T and inputs u_0..u_{T-1}.

    ``states`` has shape (N, T+1, n_x), ``inputs`` (N, T, n_u); x_0 = 0
    for simulated data. ``seed`` is None for hand-built or ingested data.
    """

    states: np.ndarray
    inputs: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        inputs = np.asarray(self.inputs, dtype=float)
        if states.ndim != 3 or inputs.ndim != 3:
            raise DimensionMismatch("states and inputs must be 3-D arrays")
        if states.shape[0] != inputs.shape[0]:
            raise DimensionMismatch("states and inputs disagree on experiment count")
        if states.shape[0] < 1:
            raise DimensionMismatch("need at least one experiment")
        if states.shape[1] != inputs.shape[1] + 1:
            raise DimensionMismatch(
                f"{states.shape[1]} states per experiment require {states.shape[1] - 1} inputs, got {inputs.shape[1]}"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)

    @property
    def n_experiments(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        """Number of transitions T per experiment."""
        return self.inputs.shape[1]

    @property
    def n_x(self) -> int:
        return self.states.shape[2]

    @property
    def n_u(self) -> int:
        return self.inputs.shape[2]

    def last_transition(self) -> tuple[np.ndarray, np.ndarray]:
        """Covariates Z = [x_{T-1} u_{T-1}] and responses X = x_T, one row per experiment."""
        t = self.horizon
        if t < 1:
            raise DimensionMismatch("horizon must be >= 1 for a transition")
        z = np.hstack([self.states[:, t - 1], self.inputs[:, t - 1]])
        return z, self.states[:, t].copy()

    def pooled_transitions(self) -> tuple[np.ndarray, np.ndarray]:
        """All transitions stacked: Z rows (x_t, u_t), responses x_{t+1}, t = 0..T-1."""
        n, t = self.n_experiments, self.horizon
        if t < 1:
            raise DimensionMismatch("horizon must be >= 1 for a transition")
        z = np.concatenate([self.states[:, :t], self.inputs], axis=2).reshape(n * t, -1)
        x = self.states[:, 1:].reshape(n * t, self.n_x)
        return z, x

    def noise(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Recover w_t = x_{t+1} - A x_t - B u_t under the given truth."""
        t = self.horizon
        return (
            self.states[:, 1:]
            - self.states[:, :t] @ np.asarray(a).T
            - self.inputs @ np.asarray(b).T
        )


@dataclass(frozen=True)
class SingleTrajectory:
    """One rollout: states x_0..x_T and, unless autonomous, inputs u_0..u_{T-1}."""

    states: np.ndarray
    inputs: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2:
            raise DimensionMismatch("states must be a (T+1, n_x) array")
        object.__setattr__(self, "states", states)
        if self.inputs is not None:
            inputs = np.asarray(self.inputs, dtype=float)
            if inputs.ndim != 2 or inputs.shape[0] != states.shape[0] - 1:
                raise DimensionMismatch("inputs must be a (T, n_u) array")
            object.__setattr__(self, "inputs", inputs)

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def n_x(self) -> int:
        return self.states.shape[1]

    def regressors(self, mode: str) -> tuple[np.ndarray, np.ndarray]:
        """Covariate/response pairs (z_t, y_t) with y_t = x_{t+1}.

        mode 'autonomous' uses z_t = x_t; 'controlled' uses z_t = (x_t, u_t).
        """
        if mode == "autonomous":
            return self.states[:-1].copy(), self.states[1:].copy()
        if mode == "controlled":
            if self.inputs is None:
                raise DimensionMismatch("controlled regression requires recorded inputs")
            return np.hstack([self.states[:-1], self.inputs]), self.states[1:].copy()
        raise ValueError(f"unknown mode {mode!r}")


def gramian(a: np.ndarray, b: np.ndarray, horizon: int) -> np.ndarray:
    """Controllability Gramian sum_{t=0}^{T} A^t B B^T (A^T)^t.

    Computed by iterating M <- A M A^T + B B^T for T+1 steps and
    symmetrizing to remove round-off asymmetry.  Monotone nondecreasing
    in T in the Loewner order.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    if a.shape[0] != a.shape[1] or b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"incompatible shapes A{a.shape}, B{b.shape}")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    bbt = b @ b.T
    m = np.zeros_like(bbt)
    for _ in range(int(horizon) + 1):
        m = a @ m @ a.T + bbt
    return (m + m.T) / 2.0


def state_covariance(sys: LtiSystem, horizon: int) -> np.ndarray:
    """Sigma_x = sigma_u^2 Gramian(A, B, T) + sigma_w^2 Gramian(A, I, T)."""
    return sys.sigma_u**2 * gramian(sys.a, sys.b, horizon) + sys.sigma_w**2 * gramian(
        sys.a, np.eye(sys.n_x), horizon
    )


def joint_covariance(sys: LtiSystem, horizon: int) -> np.ndarray:
    """Block-diagonal covariance of the stacked covariate (x, u)."""
    sx = state_covariance(sys, horizon)
    out = np.zeros((sys.n_x + sys.n_u, sys.n_x + sys.n_u))
    out[: sys.n_x, : sys.n_x] = sx
    out[sys.n_x :, sys.n_x :] = sys.sigma_u**2 * np.eye(sys.n_u)
    return out


def noise_gramian(sys: LtiSystem, steps: int) -> np.ndarray:
    """Gamma_i = sigma_w^2 sum_{j=0}^{i-1} A^j (A^j)^T, the covariance of x_i."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    return sys.sigma_w**2 * gramian(sys.a, np.eye(sys.n_x), steps - 1)


def simulate_batch(sys: LtiSystem, n_experiments: int, horizon: int, seed: int) -> TrajectoryBatch:
    """Run N independent experiments of T transitions each from x_0 = 0.

    Noise and input sequences come from per-experiment keyed streams, so
    the result is bit-identical however experiments are scheduled.
    """
    if n_experiments < 1:
        raise ValueError("n_experiments must be >= 1")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    n, t = int(n_experiments), int(horizon)
    w = rng.block_normals(seed, rng.TAG_BATCH_NOISE, n, (t, sys.n_x)) * sys.sigma_w
    u = rng.block_normals(seed, rng.TAG_BATCH_INPUT, n, (t, sys.n_u)) * sys.sigma_u
    states = np.zeros((n, t + 1, sys.n_x))
    at, bt = sys.a.T, sys.b.T
    x = states[:, 0]
    for k in range(t):
        x = x @ at + u[:, k] @ bt + w[:, k]
        states[:, k + 1] = x
    return TrajectoryBatch(states=states, inputs=u, seed=int(seed))


def simulate_single(
    sys: LtiSystem, horizon: int, autonomous: bool = False, seed: int = 0
) -> SingleTrajectory:
    """One rollout of T transitions from x_0 = 0; autonomous drops the B u_t term."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    t = int(horizon)
    w = rng.stream(seed, rng.TAG_SINGLE_NOISE).normal(size=(t, sys.n_x)) * sys.sigma_w
    if autonomous:
        drive = w
        inputs = None
    else:
        inputs = rng.stream(seed, rng.TAG_SINGLE_INPUT).normal(size=(t, sys.n_u)) * sys.sigma_u
        drive = inputs @ sys.b.T + w
    states = np.zeros((t + 1, sys.n_x))
    if sys.n_x == 1:
        # scalar recursion x_{t+1} = a x_t + drive_t as one filter pass
        states[1:, 0] = lfilter([1.0], [1.0, -sys.a[0, 0]], drive[:, 0])
    else:
        x = states[0]
        at = sys.a.T
        for k in range(t):
            x = x @ at + drive[k]
            states[k + 1] = x
    return SingleTrajectory(states=states, inputs=inputs, seed=int(seed))


# ---------------------------------------------------------------------------
# Persistence: CSV rows `experiment,t,x_*,u_*` (u cells empty at t = T) and a
# JSON envelope carrying system metadata and the seed.
# ---------------------------------------------------------------------------


def _csv_header(n_x: int, n_u: int) -> list[str]:
    return ["experiment", "t"] + [f"x_{j}" for j in range(n_x)] + [f"u_{j}" for j in range(n_u)]


def save_batch_csv(batch: TrajectoryBatch, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_csv_header(batch.n_x, batch.n_u))
        t_max = batch.horizon
        for i in range(batch.n_experiments):
            for t in range(t_max + 1):
                row = [str(i), str(t)] + [fmt17(v) for v in batch.states[i, t]]
                if t < t_max:
                    row += [fmt17(v) for v in batch.inputs[i, t]]
                else:
                    row += [""] * batch.n_u
                writer.writerow(row)


def load_batch_csv(path) -> TrajectoryBatch:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_x = sum(1 for h in header if h.startswith("x_"))
        n_u = sum(1 for h in header if h.startswith("u_"))
        rows = {}
        for row in reader:
            i, t = int(row[0]), int(row[1])
            rows.setdefault(i, {})[t] = row[2:]
    n = len(rows)
    t_max = max(rows[0]) if rows else 0
    states = np.zeros((n, t_max + 1, n_x))
    inputs = np.zeros((n, t_max, n_u))
    for i, by_t in rows.items():
        for t, vals in by_t.items():
            states[i, t] = [float(v) for v in vals[:n_x]]
            if t < t_max:
                inputs[i, t] = [float(v) for v in vals[n_x : n_x + n_u]]
    return TrajectoryBatch(states=states, inputs=inputs, seed=None)


def save_single_csv(traj: SingleTrajectory, path) -> None:
    n_u = 0 if traj.inputs is None else traj.inputs.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_csv_header(traj.n_x, n_u))
        for t in range(traj.horizon + 1):
            row = ["0", str(t)] + [fmt17(v) for v in traj.states[t]]
            if n_u:
                row += [fmt17(v) for v in traj.inputs[t]] if t < traj.horizon else [""] * n_u
            writer.writerow(row)


def load_single_csv(path) -> SingleTrajectory:
    batch = load_batch_csv(path)
    inputs = batch.inputs[0] if batch.n_u else None
    return SingleTrajectory(states=batch.states[0], inputs=inputs, seed=None)


def _system_json(sys: LtiSystem | None) -> dict | None:
    if sys is None:
        return None
    return {
        "A": [[float(v) for v in row] for row in sys.a],
        "B": [[float(v) for v in row] for row in sys.b],
        "sigma_w": sys.sigma_w,
        "sigma_u": sys.sigma_u,
    }


def batch_to_json(batch: TrajectoryBatch, sys: LtiSystem | None = None) -> dict:
    return {
        "kind": "batch",
        "seed": batch.seed,
        "n_experiments": batch.n_experiments,
        "horizon": batch.horizon,
        "n_x": batch.n_x,
        "n_u": batch.n_u,
        "system": _system_json(sys),
        "states": batch.states.tolist(),
        "inputs": batch.inputs.tolist(),
    }


def batch_from_json(payload: dict) -> TrajectoryBatch:
    return TrajectoryBatch(
        states=np.asarray(payload["states"], dtype=float),
        inputs=np.asarray(payload["inputs"], dtype=float),
        seed=payload.get("seed"),
    )


def single_to_json(traj: SingleTrajectory, sys: LtiSystem | None = None) -> dict:
    return {
        "kind": "single",
        "seed": traj.seed,
        "horizon": traj.horizon,
        "n_x": traj.n_x,
        "system": _system_json(sys),
        "states": traj.states.tolist(),
        "inputs": None if traj.inputs is None else traj.inputs.tolist(),
    }


def single_from_json(payload: dict) -> SingleTrajectory:
    inputs = payload.get("inputs")
    return SingleTrajectory(
        states=np.asarray(payload["states"], dtype=float),
        inputs=None if inputs is None else np.asarray(inputs, dtype=float),
        seed=payload.get("seed"),
    )
