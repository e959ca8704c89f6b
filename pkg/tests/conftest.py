import numpy as np
import pytest

from secure_dfrc.config import SystemConfig
from secure_dfrc.scenario import ChannelSet
from secure_dfrc.signal_model import DesignState


def small_config(n_tx=2, n_rx=2, n_irs=2, **kw) -> SystemConfig:
    return SystemConfig(n_tx=n_tx, n_rx=n_rx, n_irs=n_irs, irs_shape=(1, n_irs), **kw)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_channels(rng, n_tx, n_rx, n_irs) -> ChannelSet:
    a = np.exp(1j * rng.uniform(0, 2 * np.pi, n_irs))
    return ChannelSet(g=crandn(rng, n_tx), f=crandn(rng, n_irs), h_dl=crandn(rng, n_irs, n_tx),
                      h_ul=crandn(rng, n_rx, n_irs), a_target=a)


def random_state(rng, n_tx, n_irs, power=1.0) -> DesignState:
    w = crandn(rng, n_tx)
    w_n = crandn(rng, n_tx, n_tx)
    scale = np.sqrt(power / (np.vdot(w, w).real + np.sum(np.abs(w_n) ** 2)))
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, n_irs))
    return DesignState(w * scale, w_n * scale, phi)


def random_instance(rng, max_dim=4, **cfg):
    """Config, channels and state for one random small instance."""
    n_tx, n_rx, n_irs = (int(v) for v in rng.integers(1, max_dim + 1, 3))
    config = small_config(n_tx, n_rx, n_irs, **cfg)
    return config, random_channels(rng, n_tx, n_rx, n_irs), random_state(rng, n_tx, n_irs, config.p_radar)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
