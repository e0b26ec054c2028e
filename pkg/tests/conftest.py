import numpy as np
import pytest


def fd_gradient(objective, arr: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar objective w.r.t. every entry
    of arr (perturbed in place). The independent oracle for backprop tests."""
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        hi = objective()
        flat[i] = old - eps
        lo = objective()
        flat[i] = old
        grad.reshape(-1)[i] = (hi - lo) / (2 * eps)
    return grad


def norm_rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """Max absolute difference normalized by the larger gradient scale."""
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-12)
    return float(np.abs(a - b).max() / denom)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
