import numpy as np
import pytest

from eventlqg.model import SystemModel, validate_model
from eventlqg.riccati import solve_gains


def random_model(rng, n, T, lam=None, m=1, unstable=None, sigma_scale=1.0):
    """Random validated model; ``unstable`` picks the spectral radius regime."""
    A = rng.standard_normal((n, n))
    rho = max(abs(np.linalg.eigvals(A)))
    if unstable is None:
        unstable = bool(rng.integers(0, 2))
    target = rng.uniform(1.02, 1.3) if unstable else rng.uniform(0.3, 0.98)
    A *= target / rho
    B = rng.standard_normal((n, m))
    Gq = rng.standard_normal((n, n))
    Gw = rng.standard_normal((n, n))
    Q = Gq @ Gq.T / n + 0.1 * np.eye(n)
    Sw = sigma_scale * (Gw @ Gw.T / n + 0.05 * np.eye(n))
    if lam is None:
        lam = float(10 ** rng.uniform(-2, 2))
    return validate_model(SystemModel(
        A=A, B=B, Q=Q, QT=Q, R=np.eye(m) * rng.uniform(0.2, 2.0), Sigma_w=Sw, lam=lam, T=T,
        x0_mean=np.zeros(n), x0_cov=np.eye(n)))


@pytest.fixture
def scalar_model():
    return validate_model(SystemModel(A=1, B=1, Q=1, QT=1, R=1, Sigma_w=0.5, lam=0.3, T=2,
                                      x0_mean=0, x0_cov=1))


@pytest.fixture
def scalar_gains(scalar_model):
    return solve_gains(scalar_model)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
