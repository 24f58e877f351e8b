"""Alternating optimization over decoding order, semantics, and phases.

One outer iteration runs the order subproblem (with an exact power
refresh so the new order's value shows up in the energy) and then the
beam/semantic subproblem. Each candidate is accepted only if it lowers
total energy, so the energy history is nonincreasing by construction,
not statistically. Baseline schemes reuse the same loop with one block
of variables frozen.
"""

from dataclasses import dataclass, field

import numpy as np

from . import beam_sem_opt, oracle, order_opt, sysmodel

SCHEMES = ("jtac", "fixed-phase", "fixed-semantic", "channel-decoding")

MAX_OUTER_ITERS = 100
RHO_REPAIR_STEP = 0.05


@dataclass
class JtacSolution:
    order: sysmodel.DecodingOrder
    cfg: sysmodel.SemanticConfig
    bf: sysmodel.Beamforming
    energy: sysmodel.EnergyBreakdown
    history: list                     # E_o per outer iteration, J
    iterations: int
    converged: bool
    scheme: str = "jtac"
    rank1_quality: float = np.nan
    feasible: bool = False
    history_rows: list = field(default_factory=list)  # dicts for the CLI log
    note: str = ""
    # one entry per beam/sem call: (iteration, rank1, recovery, accepted)
    beam_solves: list = field(default_factory=list)


def initialize(scen, ch, policy="default"):
    """Starting point: random (or zero) phases, rho=1, gain-sorted order,
    exact minimum powers; rho walked down toward rho_min if p_max binds.

    Raises ValueError with a per-SU shortfall report when no repair works.
    """
    K = scen.K
    if policy == "zero-phase":
        theta = np.ones(scen.L, dtype=complex)
    elif policy == "default":
        rng = np.random.default_rng(scen.seed + 101)
        theta = np.exp(2j * np.pi * rng.random(scen.L))
    elif policy == "aligned":
        # co-phase the strongest cascade with its direct link, so the RIS
        # starts out adding coherently for at least one SU; cuts the outer
        # iterations the alternation needs at large L
        k_star = int(np.argmax(np.sum(np.abs(ch.H_cascaded), axis=1)))
        ref = np.angle(ch.h_direct[k_star])
        theta = np.exp(1j * (ref - np.angle(ch.H_cascaded[k_star])))
    else:
        raise ValueError(f"unknown init policy {policy!r}")
    bf = sysmodel.Beamforming(theta=theta)

    gains = sysmodel.channel_gains(ch, bf)
    perm = tuple(sorted(range(K), key=lambda k: (-gains[k], k)))
    order = sysmodel.DecodingOrder.from_permutation(perm)

    rho = np.ones(K)
    while True:
        targets = oracle.sinr_targets(scen, rho)
        p, ok, _ = oracle.backsub_powers(gains, targets, ch.sigma2, perm, scen.p_max)
        if ok:
            return order, sysmodel.SemanticConfig(rho=rho, p=p), bf
        nxt = np.maximum(rho - RHO_REPAIR_STEP, scen.rho_min)
        if np.allclose(nxt, rho):
            break
        rho = nxt
    # no margin left: report how far each SU is from its target
    p_unc, _, _ = oracle.backsub_powers(gains, targets, ch.sigma2, perm, np.inf)
    lines = [f"SU{k}: needs {p_unc[k]:.3e} W vs p_max {scen.p_max:.3e} W"
             for k in range(K) if p_unc[k] > scen.p_max]
    raise ValueError("initialization infeasible at rho_min; " + "; ".join(lines))


def run_jtac(scen, ch, init_policy="default", dump_dir=None) -> JtacSolution:
    """Full alternation with every block free."""
    return _run(scen, ch, "jtac", init_policy, dump_dir)


def run_baseline(scen, ch, scheme, init_policy="default", dump_dir=None) -> JtacSolution:
    """One of the three comparison schemes (one variable block frozen)."""
    if scheme not in SCHEMES[1:]:
        raise ValueError(f"unknown baseline {scheme!r}; expected one of {SCHEMES[1:]}")
    return _run(scen, ch, scheme, init_policy, dump_dir)


def _failed(scen, scheme, note):
    K = scen.K
    return JtacSolution(order=sysmodel.DecodingOrder.from_permutation(tuple(range(K))),
                        cfg=sysmodel.SemanticConfig(rho=np.ones(K), p=np.zeros(K)),
                        bf=sysmodel.Beamforming(theta=np.ones(scen.L, dtype=complex)),
                        energy=sysmodel.EnergyBreakdown(E_s=np.full(K, np.inf),
                                                        E_t=np.full(K, np.inf)),
                        history=[], iterations=0, converged=False,
                        scheme=scheme, feasible=False, note=note)


def _run(scen, ch, scheme, init_policy, dump_dir) -> JtacSolution:
    freeze_theta = scheme == "fixed-phase"
    freeze_rho = scheme == "fixed-semantic"
    freeze_order = scheme == "channel-decoding"
    policy = "zero-phase" if freeze_theta else init_policy

    try:
        order, cfg, bf = initialize(scen, ch, policy)
    except ValueError as exc:
        return _failed(scen, scheme, str(exc))

    if freeze_rho:
        rho = np.full(scen.K, scen.rho_fixed)
        gains = sysmodel.channel_gains(ch, bf)
        targets = oracle.sinr_targets(scen, rho)
        p, ok, why = oracle.backsub_powers(gains, targets, ch.sigma2,
                                           order.to_permutation(), scen.p_max)
        if not ok:
            return _failed(scen, scheme, f"rho={scen.rho_fixed} start infeasible: {why}")
        cfg = sysmodel.SemanticConfig(rho=rho, p=p)

    energy = sysmodel.total_energy(scen, cfg)
    history = [energy.E_o]
    rows = [_history_row(scen, ch, bf, cfg, order, 0)]
    rank1 = 1.0
    beam_solves = []
    converged = False
    note = ""
    dump_order = dump_dir + "/order_subproblem.txt" if dump_dir else None
    dump_beam = dump_dir + "/beam_sem_subproblem.txt" if dump_dir else None

    it = 0
    resume = None
    for it in range(1, MAX_OUTER_ITERS + 1):
        E_prev = history[-1]

        if not freeze_order and scen.K > 1:
            new_order, _ = order_opt.solve_order_sca(scen, ch, bf, cfg, order,
                                                     dump_path=dump_order)
            dump_order = None
            cand = _order_candidate(scen, ch, bf, cfg, new_order)
            if cand is not None and cand[0] < energy.E_o:
                order, cfg = cand[1], cand[2]
                energy = sysmodel.total_energy(scen, cfg)

        bf_c, cfg_c, bdiag = beam_sem_opt.solve_beam_sem(
            ch, scen, order, (bf, cfg), dump_path=dump_beam,
            rho_fix=(scen.rho_fixed if freeze_rho else None),
            freeze_V=freeze_theta, resume=resume)
        dump_beam = None
        if bdiag.resume is not None:
            resume = bdiag.resume
        E_c = sysmodel.total_energy(scen, cfg_c)
        accepted = not bdiag.degraded and E_c.E_o < energy.E_o
        beam_solves.append((it, bdiag.rank1_quality, bdiag.recovery, accepted,
                            bdiag.converged))
        if accepted:
            bf, cfg, energy = bf_c, cfg_c, E_c
            rank1 = bdiag.rank1_quality if np.isfinite(bdiag.rank1_quality) else rank1

        history.append(energy.E_o)
        rows.append(_history_row(scen, ch, bf, cfg, order, it))
        if E_prev - energy.E_o <= scen.eta:
            converged = True
            break

    if not converged:
        note = f"iteration cap {MAX_OUTER_ITERS} reached"
    report = sysmodel.check_feasibility(scen, ch, bf, cfg, order)
    return JtacSolution(order=order, cfg=cfg, bf=bf, energy=energy,
                        history=history, iterations=it, converged=converged,
                        scheme=scheme, rank1_quality=rank1,
                        feasible=report.passed, history_rows=rows, note=note,
                        beam_solves=beam_solves)


def _order_candidate(scen, ch, bf, cfg, new_order):
    """Realize an order update as (E_o, order, cfg) via exact power refresh."""
    gains = sysmodel.channel_gains(ch, bf)
    targets = oracle.sinr_targets(scen, cfg.rho)
    p, ok, _ = oracle.backsub_powers(gains, targets, ch.sigma2,
                                     new_order.to_permutation(), scen.p_max)
    if not ok:
        return None
    cfg_new = sysmodel.SemanticConfig(rho=cfg.rho.copy(), p=p)
    return sysmodel.total_energy(scen, cfg_new).E_o, new_order, cfg_new


def _history_row(scen, ch, bf, cfg, order, iteration):
    energy = sysmodel.total_energy(scen, cfg)
    slack = np.inf
    for k in range(scen.K):
        cap = sysmodel.semantic_capacity(ch, bf, cfg, order, k, scen.tau)
        dem = sysmodel.traffic_demand(cfg.rho[k], scen.Q[k], scen.S_min)
        slack = min(slack, cap - dem)
    return dict(iteration=iteration, E_o=energy.E_o,
                E_s=float(np.sum(energy.E_s)), E_t=float(np.sum(energy.E_t)),
                min_slack_bits=slack)
