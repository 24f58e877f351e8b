"""Beam/semantic subproblem: QT identity, lifting, epigraphs, SROCR loop."""

import numpy as np
import pytest

from risnoma import beam_sem_opt, jtac, oracle, scenario, sysmodel
from risnoma.conic import ConicProblem, LinExpr, SolveOptions

from conftest import (make_scenario, random_channels, random_order,
                      random_theta, small_scenario)


def _instance(seed=0, L=8):
    scen = small_scenario(seed=seed, L=L)
    ch = scenario.generate_channels(scen)
    order, cfg, bf = jtac.initialize(scen, ch, "default")
    return scen, ch, bf, cfg, order


# ------------------------------------------------------- lifting and QT

def test_gram_trace_equals_equivalent_gain(rng):
    for _ in range(50):
        K, L = 3, int(rng.integers(1, 12))
        ch = random_channels(rng, K, L)
        bf = sysmodel.Beamforming(theta=random_theta(rng, L))
        v = bf.lifted_vector()
        V = np.outer(v, np.conj(v))
        for k in range(K):
            G = beam_sem_opt.compute_gram(ch, k)
            want = abs(sysmodel.equivalent_channel(ch, bf, k)) ** 2
            assert beam_sem_opt.lifted_gain(G, V) == pytest.approx(
                want, rel=1e-9)


def test_gram_is_hermitian_psd(rng):
    ch = random_channels(rng, 2, 5)
    G = beam_sem_opt.compute_gram(ch, 0)
    assert np.allclose(G, G.conj().T)
    lam = np.linalg.eigvalsh(G)
    assert lam.min() >= -1e-18
    # rank one by construction
    assert lam[:-1] == pytest.approx(np.zeros(len(lam) - 1), abs=1e-18)


def test_qt_fixed_point_reproduces_sinr(rng):
    # substituting the closed-form auxiliary back into the quadratic
    # surrogate returns the plain SINR exactly
    for _ in range(50):
        K, L = int(rng.integers(1, 5)), int(rng.integers(1, 16))
        ch = random_channels(rng, K, L)
        bf = sysmodel.Beamforming(theta=random_theta(rng, L))
        v = bf.lifted_vector()
        V = np.outer(v, np.conj(v))
        p = rng.uniform(1e-4, 1.0, K)
        order = random_order(rng, K)
        G = [beam_sem_opt.compute_gram(ch, k) for k in range(K)]
        state = beam_sem_opt.QtState(y=np.zeros(K), z=np.zeros(K),
                                     gamma_hat=np.zeros(K), G=G)
        y = beam_sem_opt.qt_update_y(state, V, p, order, ch.sigma2)
        sinr_direct = beam_sem_opt.lifted_sinr(state, V, p, order, ch.sigma2)
        c = np.array([beam_sem_opt.lifted_gain(G[k], V) for k in range(K)])
        for k in range(K):
            denom = ch.sigma2 + sum(order.pi[k, kp] * c[kp] * p[kp]
                                    for kp in range(K) if kp != k)
            surrogate = 2.0 * y[k] * np.sqrt(c[k] * p[k]) - y[k] ** 2 * denom
            assert surrogate == pytest.approx(sinr_direct[k], rel=1e-9)


# ------------------------------------------------------------- epigraphs

@pytest.mark.parametrize("alpha", [1.0, 2.0, 4.0, 1.7])
def test_neg_power_epigraph_tight_at_fixed_rho(alpha):
    # minimizing the epigraph sum at pinned rho must land on rho^(-alpha)
    rho_val = 0.37
    prob = ConicProblem("epi")
    r = prob.real_var("rho", 2, lb=0.1, ub=1.0)
    exprs = beam_sem_opt._neg_power_epigraph(prob, [r[0], r[1]], alpha, "t")
    prob.add_eq(r[0], rho_val)
    prob.add_eq(r[1], 0.9)
    prob.minimize(exprs[0] + exprs[1])
    sol = prob.solve(SolveOptions(backend="clarabel", eps=1e-10))
    assert sol.ok
    want = rho_val ** (-alpha) + 0.9 ** (-alpha)
    assert sol.obj_val == pytest.approx(want, rel=1e-6)


# --------------------------------------------------------- full subproblem

def test_solve_beam_sem_improves_and_stays_feasible():
    scen, ch, bf, cfg, order = _instance(seed=0)
    E0 = sysmodel.total_energy(scen, cfg).E_o
    bf2, cfg2, diag = beam_sem_opt.solve_beam_sem(ch, scen, order, (bf, cfg))
    E2 = sysmodel.total_energy(scen, cfg2).E_o
    assert E2 <= E0 + 1e-12
    assert sysmodel.check_feasibility(scen, ch, bf2, cfg2, order).passed
    assert diag.converged
    assert diag.rank1_quality >= 1.0 - beam_sem_opt.RANK1_TOL
    assert np.all(np.abs(np.abs(bf2.theta) - 1.0) < 1e-9)


def test_solve_beam_sem_monotone_model_trace():
    scen, ch, bf, cfg, order = _instance(seed=1)
    _, _, diag = beam_sem_opt.solve_beam_sem(ch, scen, order, (bf, cfg))
    energies = [t[2] for t in diag.trace if np.isfinite(t[2])]
    assert len(energies) >= 1


def test_solve_beam_sem_freeze_phase_keeps_theta():
    scen, ch, bf, cfg, order = _instance(seed=2)
    bf2, cfg2, diag = beam_sem_opt.solve_beam_sem(ch, scen, order, (bf, cfg),
                                                  freeze_V=True)
    np.testing.assert_allclose(bf2.theta, bf.theta)
    assert diag.rank1_quality == 1.0
    assert diag.converged
    assert sysmodel.check_feasibility(scen, ch, bf2, cfg2, order).passed


def test_solve_beam_sem_rho_fix_pins_extraction():
    scen, ch, bf, cfg, order = _instance(seed=3)
    rho_fix = scen.rho_fixed
    gains = sysmodel.channel_gains(ch, bf)
    targets = oracle.sinr_targets(scen, np.full(scen.K, rho_fix))
    p, ok, _ = oracle.backsub_powers(gains, targets, ch.sigma2,
                                     order.to_permutation(), scen.p_max)
    assert ok
    cfg0 = sysmodel.SemanticConfig(rho=np.full(scen.K, rho_fix), p=p)
    bf2, cfg2, _ = beam_sem_opt.solve_beam_sem(ch, scen, order, (bf, cfg0),
                                               rho_fix=rho_fix)
    np.testing.assert_allclose(cfg2.rho, np.full(scen.K, rho_fix), rtol=0)


def test_solve_beam_sem_resume_shortcuts_the_ramp():
    scen, ch, bf, cfg, order = _instance(seed=4)
    bf1, cfg1, d1 = beam_sem_opt.solve_beam_sem(ch, scen, order, (bf, cfg))
    assert d1.resume is not None
    bf2, cfg2, d2 = beam_sem_opt.solve_beam_sem(ch, scen, order, (bf1, cfg1),
                                                resume=d1.resume)
    assert d2.solves <= max(2, d1.solves - 1)
    E1 = sysmodel.total_energy(scen, cfg1).E_o
    E2 = sysmodel.total_energy(scen, cfg2).E_o
    assert E2 <= E1 * (1.0 + 1e-6)


def test_solve_beam_sem_resume_ignored_on_order_change():
    scen, ch, bf, cfg, order = _instance(seed=5)
    bf1, cfg1, d1 = beam_sem_opt.solve_beam_sem(ch, scen, order, (bf, cfg))
    # a payload stamped with a different permutation must be discarded, so
    # the solve behaves exactly like one that never saw a payload
    stale = dict(d1.resume)
    stale["perm"] = tuple(reversed(stale["perm"]))
    bf2, cfg2, d2 = beam_sem_opt.solve_beam_sem(ch, scen, order, (bf1, cfg1),
                                                resume=stale)
    bf3, cfg3, d3 = beam_sem_opt.solve_beam_sem(ch, scen, order, (bf1, cfg1))
    assert d2.solves == d3.solves
    assert sysmodel.total_energy(scen, cfg2).E_o == pytest.approx(
        sysmodel.total_energy(scen, cfg3).E_o, rel=1e-9)


# ------------------------------------------------------------ rank-1 paths

def test_extract_rank_one_eigenvector_path(rng):
    theta = random_theta(rng, 6)
    v = np.concatenate([theta, [1.0]])
    V = np.outer(v, np.conj(v))
    bf, how = beam_sem_opt.extract_rank_one(V)
    assert how == "eigenvector"
    # same lifted gains as the source vector, up to global phase
    w = bf.lifted_vector()
    assert abs(np.vdot(w, v)) ** 2 == pytest.approx(
        float(np.vdot(v, v).real) ** 2, rel=1e-9)


def test_extract_rank_one_randomization_path(rng):
    v1 = np.concatenate([random_theta(rng, 6), [1.0]])
    v2 = np.concatenate([random_theta(rng, 6), [1.0]])
    V = 0.6 * np.outer(v1, np.conj(v1)) + 0.4 * np.outer(v2, np.conj(v2))
    bf, how = beam_sem_opt.extract_rank_one(V, rng=rng)
    assert how == "randomization"
    assert np.all(np.abs(np.abs(bf.theta) - 1.0) < 1e-9)


# -------------------------------------------------- power-only cross-check

def test_min_powers_conic_matches_backsub(rng):
    scen = small_scenario(seed=6)
    ch = scenario.generate_channels(scen)
    for trial in range(10):
        bf = sysmodel.Beamforming(theta=random_theta(rng, scen.L))
        order = random_order(rng, scen.K)
        rho = rng.uniform(0.3, 1.0, scen.K)
        gains = sysmodel.channel_gains(ch, bf)
        targets = oracle.sinr_targets(scen, rho)
        p_ref, ok, _ = oracle.backsub_powers(gains, targets, ch.sigma2,
                                             order.to_permutation(), scen.p_max)
        if not ok:
            continue
        p_lp, ok_lp, why = beam_sem_opt.min_powers_conic(scen, ch, bf, rho, order)
        assert ok_lp, why
        np.testing.assert_allclose(p_lp, p_ref, rtol=1e-6)


def test_min_powers_conic_zero_gain_guard():
    scen = make_scenario(su_pos=((6.0, 2.0), (8.0, 1.5)), Q=(1e4, 1e4),
                         f=(5e8, 5e8), L=2)
    ch = scenario.ChannelSet(h_direct=np.array([0.0 + 0j, 1e-4 + 0j]),
                             H_cascaded=np.zeros((2, 2), dtype=complex),
                             sigma2=1e-11)
    bf = sysmodel.Beamforming(theta=np.ones(2, dtype=complex))
    order = sysmodel.DecodingOrder.from_permutation((0, 1))
    p, ok, why = beam_sem_opt.min_powers_conic(scen, ch, bf,
                                               np.ones(2), order)
    assert not ok
    assert "zero channel gain" in why
