"""System model: equivalent channels, SIC capacities, demands, energy.

The uplink NOMA receiver decodes users successively; the binary matrix
pi encodes the order (pi[k,kp]=1 means user k is decoded before kp and
therefore suffers kp's interference). Semantic compression at factor
rho trades transmit traffic against compute energy at both ends.
"""

from dataclasses import dataclass, field

import numpy as np

LN2 = np.log(2.0)

UNIT_MODULUS_TOL = 1e-9
CAPACITY_TOL_BITS = 1e-6


@dataclass
class Beamforming:
    """RIS phase configuration theta (length L, unit-modulus entries).

    V, when present, is the lifted (L+1)x(L+1) Hermitian matrix used by
    the semidefinite step; V = [theta;1][theta;1]^H holds iff rank 1.
    """
    theta: np.ndarray
    V: np.ndarray = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=complex)
        dev = np.max(np.abs(np.abs(self.theta) - 1.0)) if self.theta.size else 0.0
        if dev > UNIT_MODULUS_TOL:
            raise ValueError(f"theta not unit-modulus (max deviation {dev:.3e})")

    @property
    def L(self):
        return self.theta.shape[0]

    def lifted_vector(self):
        """[theta; 1] column used to form rank-one V."""
        return np.concatenate([self.theta, [1.0 + 0.0j]])


def phases_to_beamforming(phases) -> Beamforming:
    return Beamforming(theta=np.exp(1j * np.asarray(phases, dtype=float)))


@dataclass
class DecodingOrder:
    """SIC decoding order as a binary relation plus priority indicators.

    pi[k,kp]=1 means k is decoded earlier than kp. r holds real priority
    indicators (smaller = decoded earlier) kept in [0, K]; M is the big-M
    constant making the ordering constraint inactive when pi[k,kp]=0.
    """
    pi: np.ndarray
    r: np.ndarray = None
    M: float = None

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        K = self.pi.shape[0]
        if self.M is None:
            self.M = K + 1.0
        if self.r is None:
            self.r = self._derive_r()

    @property
    def K(self):
        return self.pi.shape[0]

    def _derive_r(self):
        # decoded earlier -> larger row sum -> smaller priority value
        rowsum = self.pi.sum(axis=1)
        return (self.K - 1.0) - rowsum

    def is_valid(self):
        K = self.K
        if np.any(np.abs(self.pi - np.round(self.pi)) > 1e-9):
            return False
        p = np.round(self.pi).astype(int)
        if np.any(np.diag(p) != 0):
            return False
        for k in range(K):
            for kp in range(k + 1, K):
                if p[k, kp] + p[kp, k] != 1:
                    return False
        rowsums = sorted(p.sum(axis=1))
        return rowsums == list(range(K))

    def to_permutation(self):
        """Decode sequence (first decoded to last), by descending row sum."""
        rowsum = self.pi.sum(axis=1)
        srt = sorted(range(self.K), key=lambda k: (-rowsum[k], k))
        assert sorted(np.round(rowsum).astype(int)) == list(range(self.K)), \
            "row sums do not form a permutation"
        return tuple(srt)

    @classmethod
    def from_permutation(cls, perm):
        """Build from a decode sequence (perm[0] decoded first)."""
        K = len(perm)
        pi = np.zeros((K, K))
        for i, k in enumerate(perm):
            for kp in perm[i + 1:]:
                pi[k, kp] = 1.0
        r = np.zeros(K)
        for i, k in enumerate(perm):
            r[k] = float(i)
        return cls(pi=pi, r=r, M=K + 1.0)


@dataclass
class SemanticConfig:
    """Per-user extraction factors rho and transmit powers p (W)."""
    rho: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.p = np.asarray(self.p, dtype=float)


@dataclass
class EnergyBreakdown:
    E_s: np.ndarray   # per-user semantic-control energy (J)
    E_t: np.ndarray   # per-user transmit energy (J)

    @property
    def E_o(self):
        return float(self.E_s.sum() + self.E_t.sum())


# ------------------------------------------------------------------- physics

def equivalent_channel(ch, bf: Beamforming, k: int) -> complex:
    """Combined AP<->SU-k channel through the RIS: H_k @ theta + h_direct."""
    return complex(ch.H_cascaded[k] @ bf.theta + ch.h_direct[k])


def channel_gains(ch, bf: Beamforming) -> np.ndarray:
    """|h_k|^2 for all users at the given phase configuration."""
    h = ch.H_cascaded @ bf.theta + ch.h_direct
    return np.abs(h) ** 2


def sinr(gains, p, order: DecodingOrder, sigma2, k):
    intf = float(order.pi[k] @ (gains * p)) - float(order.pi[k, k] * gains[k] * p[k])
    return gains[k] * p[k] / (intf + sigma2)


def semantic_capacity(ch, bf, cfg: SemanticConfig, order: DecodingOrder, k, tau) -> float:
    """Achievable bits for SU-k under SIC: tau*log2(1+SINR_k)."""
    gains = channel_gains(ch, bf)
    val = sinr(gains, cfg.p, order, ch.sigma2, k)
    return tau * np.log1p(val) / LN2


def traffic_demand(rho_k, Q_k, S_min) -> float:
    """Required capacity after compression: max(S_min, rho*Q)."""
    return max(float(S_min), float(rho_k) * float(Q_k))


def semantic_energy(scen, rho_k, k) -> float:
    """Extraction + recovery compute energy for SU-k at factor rho."""
    W_e = scen.a * scen.Q[k] / rho_k ** scen.alpha_e
    W_r = scen.b * scen.Q[k] / rho_k ** scen.alpha_r
    return scen.kappa * (scen.f[k] ** 2 * W_e + scen.g ** 2 * W_r)


def total_energy(scen, cfg: SemanticConfig) -> EnergyBreakdown:
    E_s = np.array([semantic_energy(scen, cfg.rho[k], k) for k in range(scen.K)])
    E_t = scen.tau * cfg.p
    return EnergyBreakdown(E_s=E_s, E_t=np.asarray(E_t, dtype=float))


# --------------------------------------------------------------- feasibility

@dataclass
class FeasibilityEntry:
    family: str
    passed: bool
    worst_violation: float
    detail: str = ""


@dataclass
class FeasibilityReport:
    entries: list = field(default_factory=list)

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def worst(self, family):
        for e in self.entries:
            if e.family == family:
                return e
        return None

    def to_text(self):
        lines = [f"feasible={self.passed}"]
        for e in self.entries:
            lines.append(f"  {e.family}: {'pass' if e.passed else 'FAIL'} "
                         f"worst={e.worst_violation:.3e} {e.detail}".rstrip())
        return "\n".join(lines)


def check_feasibility(scen, ch, bf: Beamforming, cfg: SemanticConfig,
                      order: DecodingOrder, tol=CAPACITY_TOL_BITS) -> FeasibilityReport:
    """Verify capacity demands, variable bounds, and order validity.

    Infeasibility is reported, never raised. Capacity passes when every
    S_k >= c(rho_k) - tol (bits).
    """
    rep = FeasibilityReport()

    # capacity family
    worst = 0.0
    detail = ""
    for k in range(scen.K):
        need = traffic_demand(cfg.rho[k], scen.Q[k], scen.S_min)
        got = semantic_capacity(ch, bf, cfg, order, k, scen.tau)
        short = need - got
        if short > worst:
            worst = short
            detail = f"(SU{k}: demand {need:.6g}, capacity {got:.6g} bits)"
    rep.entries.append(FeasibilityEntry("capacity", worst <= tol, worst, detail))

    # bounds family
    viol = 0.0
    detail = ""
    checks = [
        (np.max(cfg.p - scen.p_max, initial=0.0), "power bound p <= p_max"),
        (np.max(-cfg.p, initial=0.0), "power bound p >= 0"),
        (np.max(cfg.rho - 1.0, initial=0.0), "rho bound rho <= 1"),
        (np.max(scen.rho_min - cfg.rho, initial=0.0), "rho bound rho >= rho_min"),
        (float(np.max(np.abs(np.abs(bf.theta) - 1.0), initial=0.0)) , "unit modulus"),
    ]
    for v, name in checks:
        if v > viol:
            viol, detail = float(v), name
    bound_tol = max(UNIT_MODULUS_TOL, 1e-9 * scen.p_max)
    rep.entries.append(FeasibilityEntry("bounds", viol <= bound_tol, viol, detail))

    # order family
    ok = order.is_valid()
    rep.entries.append(FeasibilityEntry(
        "order", ok, 0.0 if ok else 1.0,
        "" if ok else "pi is not a valid acyclic pairing (acyclic order)"))
    return rep
