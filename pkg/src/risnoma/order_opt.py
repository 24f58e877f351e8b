"""Decoding-order subproblem: penalty-relaxed max-min interference tolerance.

The binary order matrix is relaxed to [0,1], its binarity enforced by a
penalized concave term linearized at the previous point (SCA), and the
penalty weight grown over stages until the relaxation is numerically
binary. The linear programs are solved in noise-power units so the
interference budgets sit near 1 instead of 1e-8.

Rounding can land on an invalid matrix, so the returned order is picked
from a candidate pool (rounded LP point, a budget-sorted fallback, a
provably max-min-optimal exchange order, and the incoming order) by
exact slack comparison; the result is never worse than the input.
"""

from dataclasses import dataclass, field

import numpy as np

from . import sysmodel
from .conic import ConicProblem, LinExpr, SolveOptions

# margin standing in for the strict inequality between priority values
DELTA_R = 1e-3
BINARITY_TOL = 1e-6


@dataclass
class PenaltySchedule:
    zeta0: float = 10.0
    growth: float = 5.0
    max_stages: int = 8
    sca_iters: int = 50
    sca_tol: float = 1e-8
    relax_pairing: bool = False   # one-sided pairing slack eps2 (fidelity mode)


@dataclass
class OrderIterate:
    """State threaded through the penalty stages (budgets in sigma2 units)."""
    pi_relaxed: np.ndarray
    r: np.ndarray
    ell: np.ndarray
    upsilon: float
    eps1: float
    eps2: float
    zeta: float
    chi: np.ndarray
    w: np.ndarray = None          # received power per SU, sigma2 units


@dataclass
class OrderDiagnostics:
    stages: list = field(default_factory=list)   # (zeta, eps1, upsilon_W) per stage
    sca_iterations: int = 0
    final_eps1: float = np.nan
    min_slack_W: float = np.nan
    source: str = ""              # which candidate won
    note: str = ""


def interference_budget(scen, ch, bf, cfg, k) -> float:
    """chi_k = |h_k|^2 p_k / (2^(c_k/tau) - 1), in watts."""
    c = sysmodel.traffic_demand(cfg.rho[k], scen.Q[k], scen.S_min)
    if cfg.p[k] <= 0.0 and c > 0.0:
        raise ValueError(f"zero-power infeasible SU {k}: demand {c:.3g} bits at p=0")
    gain = abs(sysmodel.equivalent_channel(ch, bf, k)) ** 2
    return gain * cfg.p[k] / (np.exp2(c / scen.tau) - 1.0)


def slack_of_order(perm, chi, w, sigma2):
    """min_k (chi_k - sigma2 - interference after k) for a decode sequence."""
    slack = np.inf
    tail = float(np.sum(w))
    for k in perm:
        tail -= w[k]
        slack = min(slack, chi[k] - sigma2 - tail)
    return slack


def exchange_order(chi, w):
    """Decode in nonincreasing (chi_k + w_k); ties by index.

    An adjacent swap against this key never raises the pairwise minimum
    slack, so bubble-sorting to it is globally max-min optimal."""
    key = chi + w
    return tuple(sorted(range(len(chi)), key=lambda k: (-key[k], k)))


def _pair_index(K):
    pairs = [(k, kp) for k in range(K) for kp in range(K) if k != kp]
    return pairs, {pq: i for i, pq in enumerate(pairs)}


def sca_subproblem(iterate: OrderIterate, pi0: np.ndarray,
                   relax_pairing=False) -> ConicProblem:
    """One linearized penalty LP. All power-like quantities, including the
    upsilon/ell variables of the built problem, are in sigma2 units."""
    K = iterate.chi.shape[0]
    M = float(K + 1)
    pairs, idx = _pair_index(K)
    chi, w = iterate.chi, iterate.w

    prob = ConicProblem("order-sca")
    pi = prob.real_var("pi", len(pairs), lb=0.0, ub=1.0)
    r = prob.real_var("r", K, lb=0.0, ub=float(K))
    ell = prob.real_var("ell", K, lb=0.0)
    ups = prob.real_var("upsilon", 1)
    eps1 = prob.real_var("eps1", 1, lb=0.0)
    eps2 = prob.real_var("eps2", 1, lb=0.0)

    # decoded-earlier SUs carry smaller priority, strictly when pi=1
    for (k, kp) in pairs:
        prob.add_ineq(r[k] - r[kp] + pi[idx[(k, kp)]] * M, M - DELTA_R)
    # tolerance: interference seen by k plus noise plus slack within budget
    for k in range(K):
        terms = LinExpr.constant(0.0)
        for kp in range(K):
            if kp != k:
                terms = terms + pi[idx[(k, kp)]] * w[kp]
        prob.add_ineq(terms + ell[k], chi[k] - 1.0)
        prob.add_ineq(ups[0] - ell[k], 0.0)
    # linearized concavity penalty: sum pi + pi0^2 - 2 pi0 pi <= eps1
    lin = LinExpr.constant(0.0)
    off = 0.0
    for (k, kp) in pairs:
        p0 = float(pi0[k, kp])
        lin = lin + pi[idx[(k, kp)]] * (1.0 - 2.0 * p0)
        off += p0 * p0
    prob.add_ineq(lin - eps1[0], -off)
    # pairing: exactly one direction per unordered pair
    for k in range(K):
        for kp in range(k + 1, K):
            both = pi[idx[(k, kp)]] + pi[idx[(kp, k)]]
            if relax_pairing:
                prob.add_ineq(-both - eps2[0], -1.0)
                prob.add_ineq(both, 1.0)
            else:
                prob.add_eq(both, 1.0)
    if not relax_pairing:
        prob.add_eq(eps2[0], 0.0)

    prob.minimize(-ups[0] + eps1[0] * iterate.zeta + eps2[0] * iterate.zeta)
    return prob


def _pi_matrix(pi_flat, K, pairs):
    P = np.zeros((K, K))
    for i, (k, kp) in enumerate(pairs):
        P[k, kp] = pi_flat[i]
    return P


def solve_order_sca(scen, ch, bf, cfg, init: sysmodel.DecodingOrder,
                    sched: PenaltySchedule = None, dump_path=None):
    """Order update: penalty SCA, rounding, then best-of-candidates.

    Returns (DecodingOrder, OrderDiagnostics); the result's exact max-min
    slack is never below the incoming order's.
    """
    sched = sched or PenaltySchedule()
    K = scen.K
    diag = OrderDiagnostics()
    if K == 1:
        diag.source = "trivial"
        return sysmodel.DecodingOrder.from_permutation((0,)), diag

    chi_W = np.array([interference_budget(scen, ch, bf, cfg, k) for k in range(K)])
    gains = sysmodel.channel_gains(ch, bf)
    w_W = gains * cfg.p
    s2 = ch.sigma2
    chi, w = chi_W / s2, w_W / s2

    pairs, _ = _pair_index(K)
    pi0 = init.pi.astype(float)
    it = OrderIterate(pi_relaxed=pi0.copy(), r=init.r.astype(float),
                      ell=np.zeros(K), upsilon=-np.inf, eps1=np.inf, eps2=0.0,
                      zeta=sched.zeta0, chi=chi, w=w)

    opts = SolveOptions(backend="clarabel")
    pi_rel = pi0.copy()
    solved_any = False
    for _stage in range(sched.max_stages):
        prev_obj = None
        for _ in range(sched.sca_iters):
            prob = sca_subproblem(it, pi0, sched.relax_pairing)
            if dump_path is not None:
                prob.dump(dump_path)
                dump_path = None
            sol = prob.solve(opts)
            if not sol.ok:
                break
            solved_any = True
            diag.sca_iterations += 1
            pi_rel = _pi_matrix(sol.values["pi"], K, pairs)
            it.pi_relaxed = pi_rel
            it.r = sol.values["r"]
            it.ell = sol.values["ell"]
            it.upsilon = float(sol.values["upsilon"][0])
            it.eps1 = float(np.sum(pi_rel * (1.0 - pi_rel)))
            it.eps2 = float(sol.values["eps2"][0])
            pi0 = pi_rel.copy()
            if prev_obj is not None and abs(sol.obj_val - prev_obj) < sched.sca_tol:
                break
            prev_obj = sol.obj_val
        diag.stages.append((it.zeta, it.eps1, it.upsilon * s2))
        if it.eps1 < BINARITY_TOL:
            break
        it.zeta *= sched.growth
    diag.final_eps1 = it.eps1

    # candidate pool, judged by exact slack
    init_perm = init.to_permutation()
    cands = {"init": init_perm,
             "exchange": exchange_order(chi, w),
             "budget-sort": tuple(sorted(range(K), key=lambda k: (-chi[k], k)))}
    if solved_any:
        rounded = sysmodel.DecodingOrder(pi=np.round(pi_rel))
        if rounded.is_valid():
            cands["sca-rounded"] = rounded.to_permutation()
    else:
        diag.note = "order unimproved: all penalty stages infeasible"

    def score(item):
        name, perm = item
        # prefer higher slack; on ties keep init, then lexicographic
        return (-slack_of_order(perm, chi, w, 1.0),
                0 if name == "init" else 1, perm)

    diag.source, best_perm = min(cands.items(), key=score)
    diag.min_slack_W = slack_of_order(best_perm, chi, w, 1.0) * s2
    return sysmodel.DecodingOrder.from_permutation(best_perm), diag
