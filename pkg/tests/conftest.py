import numpy as np
import pytest

from ttrnn.data import generate_synthetic


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow end-to-end tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end training runs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def numeric_grad(f, arr, eps=1e-5):
    """
    Central differences of the scalar f() w.r.t. every entry of `arr`,
    which is perturbed in place and restored.
    """
    grad = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        orig = arr[idx]
        arr[idx] = orig + eps
        plus = f()
        arr[idx] = orig - eps
        minus = f()
        arr[idx] = orig
        grad[idx] = (plus - minus) / (2 * eps)
    return grad


def rel_error(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale < 1e-12:
        return 0.0
    return np.linalg.norm(a - b) / scale


def random_factors(rng, d, limit, low=1, high=6):
    while True:
        f = tuple(int(v) for v in rng.integers(low, high + 1, size=d))
        if np.prod(f) <= limit:
            return f


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_dataset():
    # 8x8x1 frames, frame size 64 = 4x4x4
    return generate_synthetic(6, (4, 6), 8, 8, 1, noise_std=0.05, seed=3, square=2)
