import numpy as np
import pytest


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240817)


def gramian_bruteforce(a, b, horizon):
    """Independent oracle: explicit sum of A^t B B^T (A^T)^t via matrix powers."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if b.shape[0] != a.shape[0]:
        b = b.T
    total = np.zeros((a.shape[0], a.shape[0]))
    for t in range(horizon + 1):
        at = np.linalg.matrix_power(a, t)
        total += at @ b @ b.T @ at.T
    return total
