import numpy as np
import pytest

from curvature.tensor import CurvatureTensor
from models.builders import constant_curvature, fubini_study, product, random_tensor
from utils.settings import load_settings


@pytest.fixture(scope="session")
def settings():
    """Defaults with a small restart budget so optimizer-backed tests stay fast."""
    return load_settings(restarts=8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240617)


@pytest.fixture(scope="session")
def sphere4():
    return constant_curvature(4, 1.0)


@pytest.fixture(scope="session")
def s2xs2():
    """Product of two unit two-spheres; the frame (e1, e2, e3, e4) splits it."""
    return product(constant_curvature(2, 1.0), constant_curvature(2, 1.0))


@pytest.fixture(scope="session")
def fs2():
    return fubini_study(2)


@pytest.fixture
def random_tensors():
    """Factory for deterministic Bianchi-projected random tensors."""
    def make(n: int, count: int, seed: int = 0, scale: float = 1.0):
        return [random_tensor(n, seed + k, scale) for k in range(count)]
    return make


@pytest.fixture
def random_orthogonal():
    def make(n: int, seed: int = 0) -> np.ndarray:
        from scipy.stats import ortho_group
        return ortho_group.rvs(n, random_state=seed)
    return make


@pytest.fixture
def zero4():
    return CurvatureTensor.zeros(4)
