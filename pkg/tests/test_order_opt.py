"""Decoding-order subproblem: budgets, exact slack, penalty SCA."""

import os

import numpy as np
import pytest

from risnoma import jtac, oracle, order_opt, scenario, sysmodel

from conftest import make_scenario, random_theta, small_scenario


def _instance(seed=0, L=8, policy="default"):
    scen = small_scenario(seed=seed, L=L)
    ch = scenario.generate_channels(scen)
    order, cfg, bf = jtac.initialize(scen, ch, policy)
    return scen, ch, bf, cfg, order


def test_interference_budget_hand_value():
    scen = make_scenario(L=2)
    ch = scenario.ChannelSet(h_direct=np.array([1e-4 + 0j, 2e-4 + 0j, 1e-4 + 0j]),
                             H_cascaded=np.zeros((3, 2), dtype=complex),
                             sigma2=1e-11)
    bf = sysmodel.Beamforming(theta=np.ones(2, dtype=complex))
    cfg = sysmodel.SemanticConfig(rho=np.ones(3), p=np.array([1e-3, 1e-3, 1e-3]))
    # demand c = rho Q = 1e4 bits, target = 2^(1e4/2e3) - 1 = 31
    chi = order_opt.interference_budget(scen, ch, bf, cfg, 0)
    assert chi == pytest.approx(1e-8 * 1e-3 / 31.0, rel=1e-12)


def test_interference_budget_rejects_zero_power():
    scen = make_scenario(L=2)
    ch = scenario.generate_channels(scen)
    bf = sysmodel.Beamforming(theta=np.ones(2, dtype=complex))
    cfg = sysmodel.SemanticConfig(rho=np.ones(3), p=np.zeros(3))
    with pytest.raises(ValueError, match="zero-power"):
        order_opt.interference_budget(scen, ch, bf, cfg, 0)


def test_slack_matches_oracle_definition(rng):
    for _ in range(20):
        K = int(rng.integers(2, 6))
        chi = 10.0 ** rng.uniform(-9, -7, K)
        w = 10.0 ** rng.uniform(-10, -8, K)
        perm = tuple(int(i) for i in rng.permutation(K))
        assert order_opt.slack_of_order(perm, chi, w, 1e-11) == pytest.approx(
            oracle.order_slack(perm, chi, w, 1e-11), rel=1e-15)


def test_exchange_order_attains_brute_force_maxmin(rng):
    # decode-by-descending (chi + w) is exactly max-min optimal
    for K in (2, 3, 4, 5):
        for _ in range(40):
            chi = 10.0 ** rng.uniform(-9, -6, K)
            w = 10.0 ** rng.uniform(-10, -7, K)
            perm = order_opt.exchange_order(chi, w)
            _, best = oracle.enumerate_orders_maxmin(chi, w, 1e-11)
            got = order_opt.slack_of_order(perm, chi, w, 1e-11)
            assert got == pytest.approx(best, rel=1e-12, abs=1e-300)


def test_exchange_order_tie_breaks_by_index():
    chi = np.array([1e-8, 1e-8, 1e-8])
    w = np.array([1e-9, 1e-9, 1e-9])
    assert order_opt.exchange_order(chi, w) == (0, 1, 2)


def test_solve_order_single_user_trivial():
    scen = make_scenario(su_pos=((6.0, 2.0),), Q=(1e4,), f=(5e8,), L=2)
    ch = scenario.generate_channels(scen)
    bf = sysmodel.Beamforming(theta=np.ones(2, dtype=complex))
    cfg = sysmodel.SemanticConfig(rho=np.ones(1), p=np.array([1e-3]))
    init = sysmodel.DecodingOrder.from_permutation((0,))
    order, diag = order_opt.solve_order_sca(scen, ch, bf, cfg, init)
    assert order.to_permutation() == (0,)
    assert diag.source == "trivial"


def test_solve_order_never_worse_than_input(rng):
    scen, ch, bf, cfg, order0 = _instance(seed=1)
    chi = np.array([order_opt.interference_budget(scen, ch, bf, cfg, k)
                    for k in range(scen.K)])
    w = sysmodel.channel_gains(ch, bf) * cfg.p
    for _ in range(6):
        perm0 = tuple(int(i) for i in rng.permutation(scen.K))
        init = sysmodel.DecodingOrder.from_permutation(perm0)
        order, _ = order_opt.solve_order_sca(scen, ch, bf, cfg, init)
        s_in = order_opt.slack_of_order(perm0, chi, w, ch.sigma2)
        s_out = order_opt.slack_of_order(order.to_permutation(), chi, w,
                                         ch.sigma2)
        assert s_out >= s_in - 1e-18


def test_solve_order_reaches_oracle_maxmin(rng):
    for seed in (0, 1, 2, 3):
        scen, ch, bf, cfg, order0 = _instance(seed=seed)
        order, diag = order_opt.solve_order_sca(scen, ch, bf, cfg, order0)
        chi = np.array([order_opt.interference_budget(scen, ch, bf, cfg, k)
                        for k in range(scen.K)])
        w = sysmodel.channel_gains(ch, bf) * cfg.p
        _, best = oracle.enumerate_orders_maxmin(chi / ch.sigma2,
                                                 w / ch.sigma2, 1.0)
        got = order_opt.slack_of_order(order.to_permutation(),
                                       chi / ch.sigma2, w / ch.sigma2, 1.0)
        assert got == pytest.approx(best, rel=1e-9, abs=1e-12)
        assert diag.min_slack_W == pytest.approx(got * ch.sigma2, rel=1e-9)


def test_solve_order_penalty_reaches_binary(rng):
    scen, ch, bf, cfg, order0 = _instance(seed=2)
    _, diag = order_opt.solve_order_sca(scen, ch, bf, cfg, order0)
    assert diag.sca_iterations > 0
    assert diag.final_eps1 < order_opt.BINARITY_TOL


def test_solve_order_relaxed_pairing_mode(rng):
    scen, ch, bf, cfg, order0 = _instance(seed=3)
    sched = order_opt.PenaltySchedule(relax_pairing=True)
    order, _ = order_opt.solve_order_sca(scen, ch, bf, cfg, order0, sched=sched)
    assert order.is_valid()


def test_solve_order_dump_writes_problem(tmp_path):
    scen, ch, bf, cfg, order0 = _instance(seed=0)
    path = str(tmp_path / "order.txt")
    order_opt.solve_order_sca(scen, ch, bf, cfg, order0, dump_path=path)
    assert os.path.exists(path)
    text = open(path).read()
    assert "ncols" in text and "cones" in text


def test_returned_order_valid_and_acyclic(rng):
    for seed in range(4):
        scen, ch, bf, cfg, order0 = _instance(seed=seed)
        order, _ = order_opt.solve_order_sca(scen, ch, bf, cfg, order0)
        assert order.is_valid()
        perm = order.to_permutation()
        assert sorted(perm) == list(range(scen.K))
