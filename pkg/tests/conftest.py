import numpy as np
import pytest

from cfirs import channel as chan
from cfirs import fp_core, model
from cfirs.config import desk_config
from cfirs.irs_opt import CmcQpData


def crandn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def small_config(**over):
    base = dict(l=2, k=2, r=1, m_b=2, m_u=2, n=4, n_h=2, n_v=2)
    base.update(over)
    return desk_config(**base)


def build_instance(seed, **over):
    """One random desk-scale instance: (config, channels, theta, w, h)."""
    cfg = small_config(**over)
    rng = np.random.default_rng(seed)
    geo = chan.sample_ue_positions(chan.default_geometry(cfg), rng)
    ang = chan.sample_angles(cfg, rng)
    ch = chan.sample_channels(cfg, geo, ang, rng)
    theta = cfg.alpha * np.exp(1j * rng.uniform(0, 2 * np.pi, cfg.n_irs_total))
    h = model.effective_channel(ch, theta)
    w = model.matched_filter_init(h, cfg.p_max)
    return cfg, ch, theta, w, h


def build_aux(cfg, h, w):
    return fp_core.optimal_aux(h, w, cfg.sigma2)


def synthetic_cmcqp(seed, nn=8, omega_scale=1.0):
    """Random well-scaled quadratic phase problem (PSD Zcal by construction)."""
    rng = np.random.default_rng(seed)
    m1 = crandn(rng, (nn, 2 * nn))
    z = m1 @ m1.conj().T / nn
    m2 = crandn(rng, (nn, 2 * nn))
    q = m2 @ m2.conj().T / nn
    omega = omega_scale * crandn(rng, nn)
    zcal = z * q.T
    zcal = 0.5 * (zcal + zcal.conj().T)
    return CmcQpData(zcal=zcal, omega=omega, z=z, q=q,
                     a=np.zeros((nn, nn), complex), e=np.zeros((nn, nn), complex))


@pytest.fixture
def make_instance():
    return build_instance


@pytest.fixture
def make_aux():
    return build_aux


@pytest.fixture
def make_cmcqp():
    return synthetic_cmcqp
