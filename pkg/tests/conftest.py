"""Shared helpers for the test suite.

Unit tests run on small deterministic instances (short L, deterministic
fading, calibrated tau/kappa so optima are interior). The heavyweight
end-to-end checks live in test_acceptance.py with their own fixtures.
"""

import numpy as np
import pytest

from risnoma import scenario, sysmodel

# calibrated knobs used across the suite: per-Hz demands around 0.5..5
# and semantic/transmit energies of the same order of magnitude
CAL = dict(tau=2e3, kappa=1e-24)


def make_scenario(**kw):
    base = dict(CAL)
    base.update(kw)
    return scenario.NetworkScenario(**base)


def small_scenario(seed=0, L=8, **kw):
    """Three-user instance small enough for second-scale solves."""
    return make_scenario(L=L, seed=seed, **kw)


def random_channels(rng, K, L, scale=1e-3):
    """Synthetic ChannelSet with random complex entries (no geometry)."""
    h_d = scale * (rng.standard_normal(K) + 1j * rng.standard_normal(K))
    H_c = scale * 0.1 * (rng.standard_normal((K, L)) + 1j * rng.standard_normal((K, L)))
    return scenario.ChannelSet(h_direct=h_d, H_cascaded=H_c,
                               sigma2=scenario.dbm_to_watt(-80.0))


def random_theta(rng, L):
    return np.exp(2j * np.pi * rng.random(L))


def random_order(rng, K):
    perm = tuple(int(i) for i in rng.permutation(K))
    return sysmodel.DecodingOrder.from_permutation(perm)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
