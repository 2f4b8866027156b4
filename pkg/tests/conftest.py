import numpy as np
import pytest

from fluidbeam.channel import sample_scenario
from fluidbeam.config import PenaltySettings, ScenarioConfig


def crandn(rng, *shape):
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2.0)


def small_scenario(seed=0, **kw):
    params = dict(N=4, K=2, L=3, region_size=2.0, sinr_target_db=10.0)
    params.update(kw)
    return sample_scenario(ScenarioConfig(**params), seed)


def uplink_duality_power(H, gammas, noise, iters=5000, tol=1e-14):
    """Minimum downlink power at fixed channels via the uplink dual fixed point."""
    Hn = H / np.sqrt(noise)
    N, K = Hn.shape
    q = np.ones(K)
    for _ in range(iters):
        M = np.eye(N) + (Hn * q) @ Hn.conj().T
        s = np.real(np.einsum("nk,nk->k", Hn.conj(), np.linalg.solve(M, Hn)))
        q_new = 1.0 / ((1.0 + 1.0 / gammas) * s)
        if np.max(np.abs(q_new - q) / q_new) < tol:
            q = q_new
            break
        q = q_new
    return float(q.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fast_settings():
    return PenaltySettings()
