"""Brute-force ground truth at desk scale.

Everything here is deliberately independent of the conic machinery:
closed-form power back-substitution for a fixed decoding order,
exhaustive enumeration over orders, and a dense grid search for
single-user instances. Used by tests as the reference the optimizers
must match, and by the optimizers only for initialization powers.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import sysmodel

ENUM_MAX_USERS = 8
GRID_DEFAULT = 1000


@dataclass
class OracleResult:
    best_order: tuple            # permutation, first entry decoded first
    powers: np.ndarray           # W per SU
    E_o: float                   # J
    enumerated: int = 0          # candidates examined
    rho_grid_best: np.ndarray = None
    theta_grid_best: np.ndarray = None
    feasible: bool = True
    reason: str = ""


def sinr_targets(scen, rho):
    """Required SINR per SU: 2^(c(rho)/tau) - 1."""
    c = np.array([sysmodel.traffic_demand(rho[k], scen.Q[k], scen.S_min)
                  for k in range(scen.K)])
    return np.exp2(c / scen.tau) - 1.0


def backsub_powers(gains, targets, sigma2, perm, p_max=np.inf):
    """Minimum powers meeting SINR targets for a fixed decode order.

    perm[0] is decoded first (suffers all later SUs as interference),
    perm[-1] last (interference-free). Solved backward so each power is
    exact given the later ones. Returns (powers, feasible, reason).
    """
    p = np.zeros(len(perm))
    interf = 0.0
    for k in reversed(perm):
        if gains[k] <= 0.0:
            if targets[k] > 0.0:
                return p, False, f"SU{k}: zero channel gain with positive demand"
            continue
        p[k] = targets[k] * (interf + sigma2) / gains[k]
        if p[k] > p_max:
            return p, False, f"SU{k}: required power {p[k]:.3e} W exceeds p_max"
        interf += gains[k] * p[k]
    return p, True, ""


def min_powers_fixed_order(scen, ch, bf, demands, perm):
    """backsub_powers with demands given in bits (targets 2^(c/tau) - 1)."""
    gains = sysmodel.channel_gains(ch, bf)
    targets = np.exp2(np.asarray(demands, dtype=float) / scen.tau) - 1.0
    return backsub_powers(gains, targets, ch.sigma2, perm, scen.p_max)


def enumerate_orders(scen, ch, bf, cfg) -> OracleResult:
    """Exhaustive min-transmit-energy decoding order for fixed (rho, theta)."""
    K = scen.K
    if K > ENUM_MAX_USERS:
        raise ValueError(
            f"enumerate_orders covers K <= {ENUM_MAX_USERS} ({ENUM_MAX_USERS}! orders); "
            f"got K={K} - use the conic order solver at this size")
    rho = np.asarray(cfg.rho, dtype=float)
    gains = sysmodel.channel_gains(ch, bf)
    targets = sinr_targets(scen, rho)
    best = None
    count = 0
    for perm in itertools.permutations(range(K)):
        count += 1
        p, ok, _ = backsub_powers(gains, targets, ch.sigma2, perm, scen.p_max)
        if not ok:
            continue
        Et = float(np.sum(p))
        if best is None or Et < best[0] - 1e-18:
            best = (Et, perm, p)
    if best is None:
        return OracleResult(best_order=tuple(range(K)), powers=np.zeros(K),
                            E_o=np.inf, enumerated=count, feasible=False,
                            reason="no feasible order at p_max")
    Et, perm, p = best
    E = sysmodel.total_energy(scen, sysmodel.SemanticConfig(rho=rho, p=p))
    return OracleResult(best_order=perm, powers=p, E_o=E.E_o, enumerated=count)


def order_slack(perm, chi, w, sigma2):
    """min_k slack of a decode order: chi_k - sigma2 - sum of later w."""
    slack = np.inf
    tail = float(np.sum(w))
    for k in perm:
        tail -= w[k]
        slack = min(slack, chi[k] - sigma2 - tail)
    return slack


def enumerate_orders_maxmin(chi, w, sigma2):
    """Brute-force max-min slack over all K! orders (test reference)."""
    K = len(chi)
    if K > ENUM_MAX_USERS:
        raise ValueError(f"K={K} exceeds enumeration cap {ENUM_MAX_USERS}")
    best_perm, best_slack = None, -np.inf
    for perm in itertools.permutations(range(K)):
        s = order_slack(perm, chi, w, sigma2)
        if s > best_slack + 1e-18:
            best_perm, best_slack = perm, s
    return best_perm, best_slack


def grid_search_tiny(scen, ch, resolution=GRID_DEFAULT) -> OracleResult:
    """Dense (rho, phase) grid optimum for K=1, L<=2 instances.

    Closed-form minimum power per grid point; claims hold to one grid
    cell. The phase grid is endpoint-open over [0, 2pi)."""
    if scen.K != 1:
        raise ValueError("grid_search_tiny handles K=1 only")
    L = scen.L
    if L > 2:
        raise ValueError("grid_search_tiny handles L <= 2 only")
    rhos = np.linspace(scen.rho_min, 1.0, resolution)
    phases = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)

    demands = np.maximum(scen.S_min, rhos * scen.Q[0])
    targets = np.exp2(demands / scen.tau) - 1.0
    Es = np.array([sysmodel.semantic_energy(scen, r, 0) for r in rhos])

    h_d = ch.h_direct[0]
    H = ch.H_cascaded[0]
    grids = np.meshgrid(*([phases] * L), indexing="ij")
    theta_flat = np.stack([np.exp(1j * g.ravel()) for g in grids], axis=1)
    gain = np.abs(theta_flat @ H + h_d) ** 2          # (#phase combos,)

    # p(rho, gain) = target * sigma2 / gain; mask p > p_max
    p = targets[:, None] * ch.sigma2 / gain[None, :]
    E = Es[:, None] + scen.tau * p
    E[p > scen.p_max] = np.inf
    idx = np.unravel_index(np.argmin(E), E.shape)
    if not np.isfinite(E[idx]):
        return OracleResult(best_order=(0,), powers=np.zeros(1), E_o=np.inf,
                            enumerated=E.size, feasible=False,
                            reason="no feasible grid point")
    best_rho = rhos[idx[0]]
    best_theta = theta_flat[idx[1]]
    return OracleResult(best_order=(0,), powers=np.array([p[idx]]),
                        E_o=float(E[idx]), enumerated=E.size,
                        rho_grid_best=np.array([best_rho]),
                        theta_grid_best=best_theta)
