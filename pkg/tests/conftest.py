import numpy as np
import pytest

from risched.config import OptimParams, SystemConfig


def toy_config(**overrides) -> SystemConfig:
    """Small geometry that keeps optimizer calls cheap."""
    kw = dict(M=2, N=4, K=4, D_theta=3, D_beta=1, D_W=1, Upsilon=3, seed=0)
    kw.update(overrides)
    return SystemConfig(**kw)


def fast_params(**overrides) -> OptimParams:
    kw = dict(wmmse_max_iter=60, wmmse_tol=1e-9, rcg_max_iter=40, rcg_tol=1e-7,
              bcd_max_outer=3)
    kw.update(overrides)
    return OptimParams(**kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
