"""Channel/SINR/capacity/energy bookkeeping and feasibility reporting."""

import numpy as np
import pytest

from risnoma import scenario, sysmodel
from risnoma.sysmodel import (Beamforming, DecodingOrder, SemanticConfig,
                              check_feasibility, equivalent_channel,
                              phases_to_beamforming, semantic_capacity,
                              semantic_energy, sinr, total_energy,
                              traffic_demand)

from conftest import make_scenario

SIGMA2 = 1e-11


def chanset(h_direct, H_cascaded, sigma2=SIGMA2):
    return scenario.ChannelSet(h_direct=np.asarray(h_direct, dtype=complex),
                               H_cascaded=np.asarray(H_cascaded, dtype=complex),
                               sigma2=sigma2)


# --------------------------------------------------------- equivalent channel

def test_no_ris_contribution_returns_direct_link():
    ch = chanset([0.3 + 0.4j], np.zeros((1, 3)))
    bf = phases_to_beamforming([0.1, 2.0, -1.0])
    assert equivalent_channel(ch, bf, 0) == pytest.approx(0.3 + 0.4j)


def test_identity_phase_single_element():
    ch = chanset([0.0], [[1.0]])
    bf = Beamforming(theta=np.array([1.0 + 0.0j]))
    assert equivalent_channel(ch, bf, 0) == pytest.approx(1.0 + 0.0j)


def test_two_element_complex_sum():
    ch = chanset([1.0], [[1.0, 1.0j]])
    bf = Beamforming(theta=np.array([1.0, -1.0j]))
    assert equivalent_channel(ch, bf, 0) == pytest.approx(3.0 + 0.0j)


def test_ris_term_is_linear_in_theta_amplitude():
    rng = np.random.default_rng(0)
    row = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    ch = chanset([0.0], row[None, :])
    bf = phases_to_beamforming(rng.uniform(0, 2 * np.pi, 5))
    h1 = equivalent_channel(ch, bf, 0)
    ch2 = chanset([0.0], 2.0 * row[None, :])
    assert equivalent_channel(ch2, bf, 0) == pytest.approx(2.0 * h1)


def test_beamforming_rejects_non_unit_modulus():
    with pytest.raises(ValueError, match="unit-modulus"):
        Beamforming(theta=np.array([1.0, 0.5]))


def test_lifted_vector_appends_one():
    bf = phases_to_beamforming([0.3, 0.7])
    v = bf.lifted_vector()
    assert v.shape == (3,)
    assert v[-1] == 1.0 + 0.0j


# ------------------------------------------------------------ decoding order

def test_permutation_round_trip():
    order = DecodingOrder.from_permutation([2, 0, 1])
    assert order.to_permutation() == (2, 0, 1)
    assert order.is_valid()
    # decoded first -> every later user marked
    assert order.pi[2, 0] == 1 and order.pi[2, 1] == 1 and order.pi[0, 1] == 1
    assert np.all(np.diag(order.pi) == 0)
    assert order.r[2] == 0 and order.r[0] == 1 and order.r[1] == 2
    assert order.M == 4.0


def test_cyclic_relation_is_invalid():
    pi = np.zeros((3, 3))
    pi[0, 1] = pi[1, 2] = pi[2, 0] = 1.0
    assert not DecodingOrder(pi=pi).is_valid()


def test_pairing_must_cover_every_pair():
    pi = np.zeros((2, 2))  # neither user ordered
    assert not DecodingOrder(pi=pi).is_valid()


# ------------------------------------------------------------- SINR/capacity

def test_single_user_unit_snr_gives_one_bit():
    ch = chanset([np.sqrt(1e-11)], np.zeros((1, 1)))
    bf = Beamforming(theta=np.ones(1, dtype=complex))
    cfg = SemanticConfig(rho=[1.0], p=[1.0])
    order = DecodingOrder.from_permutation([0])
    s = semantic_capacity(ch, bf, cfg, order, 0, tau=1.0)
    assert s == pytest.approx(1.0, rel=1e-12)


def test_zero_power_zero_capacity():
    ch = chanset([1e-4], np.zeros((1, 1)))
    bf = Beamforming(theta=np.ones(1, dtype=complex))
    cfg = SemanticConfig(rho=[1.0], p=[0.0])
    order = DecodingOrder.from_permutation([0])
    assert semantic_capacity(ch, bf, cfg, order, 0, tau=1.0) == 0.0


def test_two_user_interference_capacity():
    g = np.sqrt(1e-8)
    ch = chanset([g, g], np.zeros((2, 1)))
    bf = Beamforming(theta=np.ones(1, dtype=complex))
    cfg = SemanticConfig(rho=[1.0, 1.0], p=[1.0, 0.5])
    order = DecodingOrder.from_permutation([0, 1])  # SU0 decoded first
    s0 = semantic_capacity(ch, bf, cfg, order, 0, tau=1.0)
    assert s0 == pytest.approx(np.log2(1 + 1e-8 / (0.5e-8 + 1e-11)), rel=1e-12)
    # reference figure quoted to four decimals elsewhere rounds loosely
    assert s0 == pytest.approx(1.5833, abs=5e-4)


def test_last_decoded_sees_noise_only():
    rng = np.random.default_rng(3)
    gains = rng.uniform(1e-9, 1e-7, 3)
    p = rng.uniform(0.01, 1.0, 3)
    order = DecodingOrder.from_permutation([1, 2, 0])  # SU0 decoded last
    assert sinr(gains, p, order, SIGMA2, 0) == pytest.approx(
        gains[0] * p[0] / SIGMA2, rel=1e-14)


def test_capacity_monotone_in_powers():
    rng = np.random.default_rng(7)
    for _ in range(20):
        gains = rng.uniform(1e-9, 1e-7, 3)
        p = rng.uniform(0.01, 1.0, 3)
        order = DecodingOrder.from_permutation([0, 1, 2])
        base = sinr(gains, p, order, SIGMA2, 0)
        p_up = p.copy()
        p_up[0] *= 1.1
        assert sinr(gains, p_up, order, SIGMA2, 0) >= base
        p_int = p.copy()
        p_int[2] *= 1.1  # interferer for SU0
        assert sinr(gains, p_int, order, SIGMA2, 0) <= base


# ------------------------------------------------------------ demand, energy

def test_traffic_demand_cases():
    assert traffic_demand(1.0, 1e4, 1e3) == 1e4
    assert traffic_demand(0.2, 1e3, 1e3) == 1e3
    assert traffic_demand(0.5, 1e4, 1e3) == 5e3


def test_semantic_energy_at_full_extraction():
    s = scenario.NetworkScenario()  # documented defaults, kappa=1e-21
    expected = 1e-21 * ((5e8) ** 2 * 100 * 1e4 + (1e9) ** 2 * 200 * 1e4)
    assert expected == pytest.approx(2250.0, rel=1e-12)
    assert semantic_energy(s, 1.0, 0) == pytest.approx(2250.0, rel=1e-12)


def test_semantic_energy_strictly_grows_as_rho_shrinks():
    s = scenario.NetworkScenario()
    vals = [semantic_energy(s, r, 0) for r in (1.0, 0.8, 0.5, 0.3)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_semantic_energy_zero_coefficients():
    s = make_scenario(a=0.0, b=0.0)
    assert semantic_energy(s, 0.5, 0) == 0.0


def test_total_energy_transmit_only():
    s = scenario.NetworkScenario(su_pos=((6.0, 2.0),), a=0.0, b=0.0, tau=1.0)
    e = total_energy(s, SemanticConfig(rho=[1.0], p=[0.1]))
    assert e.E_o == pytest.approx(0.1)


def test_total_energy_zero_power_is_semantic_sum():
    s = scenario.NetworkScenario()
    cfg = SemanticConfig(rho=np.ones(3), p=np.zeros(3))
    e = total_energy(s, cfg)
    assert e.E_o == pytest.approx(sum(semantic_energy(s, 1.0, k) for k in range(3)))


def test_total_energy_linear_sum():
    s = scenario.NetworkScenario(su_pos=((6.0, 2.0), (8.0, 1.5)),
                                 a=0.0, b=0.0, tau=2.0)
    e = total_energy(s, SemanticConfig(rho=[1.0, 1.0], p=[0.1, 0.2]))
    assert e.E_o == pytest.approx(0.6)


def test_total_energy_decomposes_per_user():
    s = make_scenario()
    cfg = SemanticConfig(rho=np.array([0.5, 0.6, 0.7]), p=np.array([0.1, 0.2, 0.3]))
    base = total_energy(s, cfg)
    cfg2 = SemanticConfig(rho=cfg.rho.copy(), p=cfg.p.copy())
    cfg2.rho[1] = 0.9
    e2 = total_energy(s, cfg2)
    assert e2.E_s[0] == base.E_s[0] and e2.E_s[2] == base.E_s[2]
    assert np.allclose(e2.E_t, base.E_t)
    cfg3 = SemanticConfig(rho=cfg.rho.copy(), p=cfg.p.copy())
    cfg3.p[1] = 0.9
    e3 = total_energy(s, cfg3)
    assert np.allclose(e3.E_s, base.E_s)
    assert e3.E_t[0] == base.E_t[0] and e3.E_t[2] == base.E_t[2]


# --------------------------------------------------------------- feasibility

def _single_user_setup(tau=2e3):
    s = make_scenario(su_pos=((6.0, 2.0),), L=2, tau=tau)
    ch = chanset([1e-3], np.zeros((1, 2)))
    bf = Beamforming(theta=np.ones(2, dtype=complex))
    return s, ch, bf


def test_exact_boundary_power_passes():
    s, ch, bf = _single_user_setup()
    rho = 0.5
    demand = traffic_demand(rho, s.Q[0], s.S_min)
    target = 2.0 ** (demand / s.tau) - 1.0
    p = target * ch.sigma2 / 1e-6  # |h|^2 = 1e-6
    cfg = SemanticConfig(rho=[rho], p=[p])
    rep = check_feasibility(s, ch, bf, cfg, DecodingOrder.from_permutation([0]))
    assert rep.passed
    assert abs(rep.worst("capacity").worst_violation) < 1e-6


def test_power_above_cap_fails_bounds():
    s, ch, bf = _single_user_setup()
    cfg = SemanticConfig(rho=[1.0], p=[s.p_max * 1.1])
    rep = check_feasibility(s, ch, bf, cfg, DecodingOrder.from_permutation([0]))
    assert not rep.passed
    bounds = rep.worst("bounds")
    assert not bounds.passed
    assert "power bound" in bounds.detail


def test_cyclic_order_fails_order_family():
    s = make_scenario()
    ch = chanset([1e-3, 1e-3, 1e-3], np.zeros((3, 2)))
    bf = Beamforming(theta=np.ones(2, dtype=complex))
    pi = np.zeros((3, 3))
    pi[0, 1] = pi[1, 2] = pi[2, 0] = 1.0
    cfg = SemanticConfig(rho=np.ones(3), p=np.full(3, 0.1))
    rep = check_feasibility(s, ch, bf, cfg, DecodingOrder(pi=pi))
    order = rep.worst("order")
    assert not order.passed
    assert "acyclic" in order.detail


def test_report_text_mentions_families():
    s, ch, bf = _single_user_setup()
    cfg = SemanticConfig(rho=[1.0], p=[0.1])
    rep = check_feasibility(s, ch, bf, cfg, DecodingOrder.from_permutation([0]))
    text = rep.to_text()
    for family in ("capacity", "bounds", "order"):
        assert family in text
