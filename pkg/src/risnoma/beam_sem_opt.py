"""Joint semantic-control and passive-beamforming subproblem.

For a fixed decoding order, alternates a closed-form quadratic-transform
auxiliary update with a convex SDP in the lifted phase matrix V, while a
rank-one relaxation level omega is ratcheted toward 1 (SROCR). Powers
are carried as z_k with z_k^2 = p_k Tr(G_k V), so the transmit term and
the power bound stay convex.

Every SDP is solved in warm-point units: the traces, powers, SINRs and
the objective are normalized by their values at the incoming iterate,
which keeps all variables near 1 regardless of the physical scales
(channel gains ~1e-6, powers ~1e-4, energies ~1e1). Without this the
first-order backend stalls and the interior-point one loses digits.
"""

from dataclasses import dataclass, field

import numpy as np

from . import sysmodel
from .conic import ConicProblem, LinExpr, SolveOptions

LN2 = np.log(2.0)

RANK1_TOL = 1e-3            # terminal requirement on lambda_1/Tr(V)
EXTRACT_QUALITY = 0.999     # eigenvector path threshold
RAND_SAMPLES = 200          # Gaussian randomization draws
OMEGA_DELTA = 0.1
OMEGA_DELTA_MIN = 1e-4
MAX_SROCR_ITERS = 40
GAIN_FLOOR_REL = 1e-6       # Tr(G_k V) >= sigma2 * this

# interior-point backend up to this embedded PSD dimension, then scs
IPM_EMBED_LIMIT = 90
# staged first-order accuracy: tight while omega is low, looser for the
# near-rank-1 endgame where the exact power repair covers feasibility
# first-order solves run loose and lean on the exact power repair plus a
# single tight polish pass; tight eps throughout made L>=60 instances burn
# the full iteration cap on every solve
SCS_EPS_EARLY = 1e-4
SCS_EPS_ENDGAME = 3e-4
SCS_POLISH_EPS = 1e-5
OMEGA_ENDGAME = 0.985


@dataclass
class QtState:
    y: np.ndarray               # QT auxiliaries, 1/sqrt(W)
    z: np.ndarray               # sqrt(p_k Tr(G_k V)), W
    gamma_hat: np.ndarray       # SINR surrogate values at the warm point
    G: list                     # Hermitian Gram matrix per SU


@dataclass
class SrocrState:
    omega: float
    e: np.ndarray               # unit principal eigenvector of current V
    delta: float
    V: np.ndarray


@dataclass
class BeamSemDiagnostics:
    trace: list = field(default_factory=list)  # (omega, lam_ratio, E_J, status)
    solves: int = 0
    rank1_quality: float = np.nan
    recovery: str = ""          # eigenvector | randomization | init
    degraded: bool = False
    converged: bool = False     # clean SROCR exit (omega and rank both at 1)
    note: str = ""
    resume: dict = None         # terminal (V, warm_raw, perm, rho_fix)


def compute_gram(ch, k):
    """G_k = row^H row for row = [cascaded_k, direct_k]; rank one, PSD."""
    row = np.concatenate([ch.H_cascaded[k], [ch.h_direct[k]]])
    return np.outer(np.conj(row), row)


def lifted_gain(G, V):
    """Tr(G V) for PSD Hermitian arguments, as a real scalar."""
    return float(np.real(np.trace(G @ V)))


def qt_update_y(state: QtState, V, p, order, sigma2):
    """Closed-form QT auxiliary: y_k = sqrt(c_k p_k) / (interference + noise)."""
    K = len(state.G)
    c = np.array([lifted_gain(state.G[k], V) for k in range(K)])
    y = np.zeros(K)
    for k in range(K):
        denom = sigma2 + sum(order.pi[k, kp] * c[kp] * p[kp]
                             for kp in range(K) if kp != k)
        y[k] = np.sqrt(max(c[k] * p[k], 0.0)) / denom
    return y


def lifted_sinr(state: QtState, V, p, order, sigma2):
    """True SINR per SU at a lifted V (k' interferes with k when pi=1)."""
    K = len(state.G)
    c = np.array([lifted_gain(state.G[k], V) for k in range(K)])
    out = np.zeros(K)
    for k in range(K):
        denom = sigma2 + sum(order.pi[k, kp] * c[kp] * p[kp]
                             for kp in range(K) if kp != k)
        out[k] = c[k] * p[k] / denom
    return out


def _neg_power_epigraph(prob, rho_exprs, alpha, tag):
    """Per-SU epigraph exprs w_k >= rho_k^(-alpha), shared-chain for {1,2,4}."""
    K = len(rho_exprs)
    if alpha in (1.0, 2.0, 4.0):
        q = prob.vars.get("qinv") or prob.real_var("qinv", K, lb=0.0)
        return _chain_epigraph(prob, rho_exprs, q, alpha, tag)
    w = prob.real_var(f"pw_{tag}", K, lb=0.0)
    for k in range(K):
        prob.add_pow(w[k], rho_exprs[k], LinExpr.constant(1.0), 1.0 / (1.0 + alpha))
    return [w[k] for k in range(K)]


def _chain_epigraph(prob, rho_exprs, q, alpha, tag):
    K = len(rho_exprs)
    if not getattr(prob, "_qinv_wired", False):
        for k in range(K):
            # q_k * rho_k >= 1  <=>  1 <= q*rho
            prob.add_quad_le(LinExpr.constant(1.0), q[k], rho_exprs[k])
        prob._qinv_wired = True
    if alpha == 1.0:
        return [q[k] for k in range(K)]
    m = prob.vars.get("qsq") or prob.real_var("qsq", K, lb=0.0)
    if not getattr(prob, "_qsq_wired", False):
        for k in range(K):
            prob.add_quad_le(q[k], m[k], LinExpr.constant(1.0))
        prob._qsq_wired = True
    if alpha == 2.0:
        return [m[k] for k in range(K)]
    w = prob.real_var(f"qquad_{tag}", K, lb=0.0)
    for k in range(K):
        prob.add_quad_le(m[k], w[k], LinExpr.constant(1.0))
    return [w[k] for k in range(K)]


def build_sdp(state: QtState, srocr: SrocrState, order, scen,
              rho0=None, freeze_V=False, rho_fix=None):
    """One QT/SROCR convex subproblem in warm-point units.

    Variables: V (unless freeze_V), rho, gamma surrogate, z, capacity
    epigraph u, transmit epigraph t, and the rho^(-alpha) chain. The
    stored scaling (attached as .scaling) is needed to read solutions
    back in watts.
    """
    K, n = scen.K, scen.L + 1
    sigma2 = scen.sigma2
    rho0 = np.ones(K) if rho0 is None else np.asarray(rho0, dtype=float)

    c = np.array([max(lifted_gain(state.G[k], srocr.V), sigma2 * GAIN_FLOOR_REL)
                  for k in range(K)])
    p0 = np.maximum(state.z ** 2 / c, 1e-12)
    Gam = np.maximum(state.gamma_hat, 1e-12)
    warm_cfg = sysmodel.SemanticConfig(rho=rho0, p=p0)
    E0 = max(sysmodel.total_energy(scen, warm_cfg).E_o, 1e-9)
    y = state.y

    prob = ConicProblem("beam-sem")
    ghat = None
    if not freeze_V:
        V = prob.hermitian_var("V", n)
        prob.add_psd()
        ghat = [V.trace_term(state.G[k] / c[k]) for k in range(K)]
    else:
        ghat = [LinExpr.constant(1.0) for _ in range(K)]
    rho = prob.real_var("rho", K, lb=scen.rho_min, ub=1.0)
    gt = prob.real_var("gamma_t", K, lb=0.0)     # gamma_hat = Gam * gamma_t
    z = prob.real_var("z", K, lb=0.0)            # true z = sqrt(c p0) * z_hat
    u = prob.real_var("u", K, lb=0.0)            # u = ln(1 + gamma_hat)
    t = prob.real_var("t", K, lb=0.0)            # transmit epigraph, p0 units

    rho_exprs = [rho[k] for k in range(K)]
    pinned = [scen.Q[k] <= scen.S_min for k in range(K)]
    epi_e = _neg_power_epigraph(prob, rho_exprs, float(scen.alpha_e), "e")
    epi_r = (_neg_power_epigraph(prob, rho_exprs, float(scen.alpha_r), "r")
             if scen.alpha_r != scen.alpha_e else epi_e)

    obj = LinExpr.constant(0.0)
    for k in range(K):
        coef_e = scen.kappa * scen.a * scen.f[k] ** 2 * scen.Q[k] / E0
        coef_r = scen.kappa * scen.b * scen.g ** 2 * scen.Q[k] / E0
        obj = obj + epi_e[k] * coef_e + epi_r[k] * coef_r + t[k] * (scen.tau * p0[k] / E0)

    for k in range(K):
        if rho_fix is not None:
            prob.add_eq(rho[k], float(rho_fix))
        elif pinned[k]:
            # demand floor S_min active on all of [rho_min, 1]: rho*=1
            prob.add_eq(rho[k], 1.0)
        # capacity: (tau/ln2) u >= S_min and >= rho Q
        prob.add_ineq(-u[k], -LN2 * scen.S_min / scen.tau)
        if not pinned[k]:
            prob.add_ineq(rho[k] * (LN2 * scen.Q[k] / scen.tau) - u[k], 0.0)
        prob.add_log_lb(u[k], gt[k] * Gam[k] + 1.0)
        # QT surrogate: interference quadratic within beta z - gamma - noise
        beta = 2.0 * y[k] * np.sqrt(c[k] * p0[k]) / Gam[k]
        cst = y[k] ** 2 * sigma2 / Gam[k]
        R = z[k] * beta - gt[k] - cst
        tail = [(R - 1.0) * 0.5]
        for kp in range(K):
            if kp != k and order.pi[k, kp] > 0.5:
                wgt = y[k] ** 2 * c[kp] * p0[kp] / Gam[k]
                tail.append(z[kp] * np.sqrt(wgt))
        prob.add_soc((R + 1.0) * 0.5, tail)
        # transmit epigraph and power cap, both against the lifted gain
        prob.add_quad_le(z[k], t[k], ghat[k])
        pbar = scen.p_max / p0[k]
        prob.add_quad_le(z[k] * (1.0 / np.sqrt(pbar)), ghat[k], LinExpr.constant(1.0))
        if not freeze_V:
            prob.add_ineq(-ghat[k], -sigma2 * GAIN_FLOOR_REL / c[k])

    if not freeze_V:
        for i in range(n):
            Eii = np.zeros((n, n), dtype=complex)
            Eii[i, i] = 1.0
            prob.add_eq(V.trace_term(Eii), 1.0)
        eh = np.outer(srocr.e, np.conj(srocr.e))
        srocr_row = V.trace_term(np.eye(n, dtype=complex) * srocr.omega - eh)
        prob.add_ineq(srocr_row * (1.0 / n), 0.0)

    prob.minimize(obj)
    prob.scaling = dict(c=c, p0=p0, Gamma=Gam, E0=E0)
    return prob


def _warm_vector(prob, scen, state, srocr, rho0, freeze_V):
    """Primal point for the first-order backend, from the current iterate.

    Feasible by construction (the warm iterate satisfies every constraint
    with z_hat = ghat = gamma_t = 1), with epigraph variables nudged off
    their boundaries.
    """
    K = scen.K
    x = np.zeros(prob.ncols)

    def fill(name, vals):
        v = prob.vars[name]
        x[v.start:v.start + v.size] = vals

    if not freeze_V:
        herm = prob.vars["V"]
        x[herm.start:herm.start + herm.size] = herm.pack(srocr.V)
    fill("rho", rho0)
    fill("gamma_t", np.ones(K))
    fill("z", np.ones(K))
    fill("u", np.log1p(np.maximum(state.gamma_hat, 1e-12)))
    fill("t", np.full(K, 1.0 + 1e-6))
    if "qinv" in prob.vars:
        fill("qinv", 1.0 / rho0 + 1e-9)
        if "qsq" in prob.vars:
            fill("qsq", (1.0 / rho0) ** 2 + 1e-9)
            for nm in prob.vars:
                if nm.startswith("qquad_"):
                    fill(nm, (1.0 / rho0) ** 4 + 1e-9)
    for nm in prob.vars:
        if nm.startswith("pw_"):
            al = float(scen.alpha_e if nm.endswith("_e") else scen.alpha_r)
            fill(nm, rho0 ** (-al) + 1e-9)
    return x


def extract_rank_one(V, quality_threshold=EXTRACT_QUALITY, context=None, rng=None):
    """Beamforming phases from a lifted V.

    Principal-eigenvector extraction when lambda_1/Tr is above the
    threshold; otherwise Gaussian randomization, scored by feasibility
    then energy when a (scen, ch, order, rho) context is supplied, and
    by the lifted quadratic form otherwise.
    """
    n = V.shape[0]
    lam, U = np.linalg.eigh(V)
    quality = float(lam[-1] / max(np.real(np.trace(V)), 1e-300))
    if quality >= quality_threshold:
        return _phases_from_vector(U[:, -1]), "eigenvector"

    rng = rng or np.random.default_rng(0)
    half = U @ np.diag(np.sqrt(np.maximum(lam, 0.0)))
    best_bf, best_key = None, None
    for _ in range(RAND_SAMPLES):
        xi = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
        cand = _phases_from_vector(half @ xi)
        key = _randomization_score(cand, V, context)
        if best_key is None or key < best_key:
            best_bf, best_key = cand, key
    return best_bf, "randomization"


def _phases_from_vector(v):
    n = v.shape[0]
    ref = v[-1] if abs(v[-1]) > 1e-12 else 1.0
    w = v * np.conj(ref) / abs(ref)
    w = np.where(np.abs(w) > 1e-12, w / np.abs(w), 1.0)
    return sysmodel.Beamforming(theta=w[: n - 1])


def _randomization_score(bf, V, context):
    """Lower is better: (infeasible flag, energy) or negative lifted power."""
    if context is None:
        v = bf.lifted_vector()
        return (-float(np.real(np.conj(v) @ V @ v)),)
    scen, ch, order, rho = context
    from . import oracle
    gains = sysmodel.channel_gains(ch, bf)
    targets = oracle.sinr_targets(scen, rho)
    perm = order.to_permutation()
    p, ok, _ = oracle.backsub_powers(gains, targets, ch.sigma2, perm, scen.p_max)
    if not ok:
        return (1, np.inf)
    return (0, sysmodel.total_energy(scen, sysmodel.SemanticConfig(rho=rho, p=p)).E_o)


def _scs_iter_caps(embed_dim):
    """Iteration caps that hold wall time per solve roughly flat.

    Per-iteration cost is dominated by the eigendecomposition of the
    embedded PSD block, so the caps shrink cubically with its size."""
    base = int(1.1e10 / max(embed_dim, 1) ** 3)
    early = int(np.clip(base, 2000, 8000))
    return early, max(1500, (2 * early) // 3)


def _solver_options(embed_dim, omega, warm_raw):
    if embed_dim <= IPM_EMBED_LIMIT:
        return SolveOptions(backend="clarabel", eps=1e-8)
    eps = SCS_EPS_EARLY if omega < OMEGA_ENDGAME else SCS_EPS_ENDGAME
    early, endgame = _scs_iter_caps(embed_dim)
    iters = early if omega < OMEGA_ENDGAME else endgame
    return SolveOptions(backend="scs", eps=eps, max_iters=iters, warm=warm_raw)


def solve_beam_sem(ch, scen, order, init, dump_path=None, rho_fix=None,
                   freeze_V=False, resume=None):
    """SROCR outer loop for one decoding order.

    init is (Beamforming, SemanticConfig). Returns (Beamforming,
    SemanticConfig, BeamSemDiagnostics); on persistent failure or
    degraded recovery the init pair comes back with a note.

    resume is the .resume payload of a previous call's diagnostics; when
    the decoding order is unchanged the relaxation restarts at the old
    near-rank-1 V instead of re-running the whole omega ramp.
    """
    K, n = scen.K, scen.L + 1
    bf0, cfg0 = init
    diag = BeamSemDiagnostics()

    G = [compute_gram(ch, k) for k in range(K)]
    V = bf0.V if bf0.V is not None else np.outer(bf0.lifted_vector(),
                                                 np.conj(bf0.lifted_vector()))
    rho = np.asarray(cfg0.rho, dtype=float).copy()
    p = np.asarray(cfg0.p, dtype=float).copy()

    rng = np.random.default_rng(scen.seed + 7)
    best = _evaluate(scen, ch, order, bf0, rho, p)
    best_bf, best_cfg = bf0, sysmodel.SemanticConfig(rho=rho.copy(), p=p.copy())
    diag.recovery = "init"

    omega, delta = 0.0, OMEGA_DELTA
    lam_ratio = _rank1_quality(V)
    warm_raw = None
    warm_x0_used = False
    perm = order.to_permutation()

    resumed = False
    if (resume is not None and not freeze_V
            and resume.get("perm") == tuple(perm)
            and resume.get("rho_fix") == rho_fix
            and resume["V"].shape == (n, n)):
        q = _rank1_quality(resume["V"])
        if q >= 0.9:
            V = resume["V"]
            warm_raw = resume.get("warm_raw")
            lam_ratio = q
            omega = min(1.0, q)
            resumed = True

    for _ in range(MAX_SROCR_ITERS):
        c = np.array([lifted_gain(G[k], V) for k in range(K)])
        z = np.sqrt(np.maximum(c * p, 0.0))
        state = QtState(y=np.zeros(K), z=z, gamma_hat=np.zeros(K), G=G)
        state.y = qt_update_y(state, V, p, order, scen.sigma2)
        state.gamma_hat = lifted_sinr(state, V, p, order, scen.sigma2)
        srocr = SrocrState(omega=omega, e=_principal(V), delta=delta, V=V)

        prob = build_sdp(state, srocr, order, scen, rho0=rho,
                         freeze_V=freeze_V, rho_fix=rho_fix)
        if dump_path is not None and diag.solves == 0:
            prob.dump(dump_path)
        opts = _solver_options(0 if freeze_V else 2 * n, omega, warm_raw)
        if (opts.backend == "scs" and warm_raw is None and not warm_x0_used):
            opts.warm = dict(x=_warm_vector(prob, scen, state, srocr, rho, freeze_V))
            warm_x0_used = True
        sol = prob.solve(opts)
        diag.solves += 1

        if not sol.ok:
            diag.trace.append((omega, lam_ratio, np.nan, sol.status))
            if resumed:
                # the old basin no longer fits the updated model: restart
                # the ramp once rather than creeping omega down
                resumed = False
                omega, warm_raw = 0.0, None
                continue
            delta *= 0.5
            if delta < OMEGA_DELTA_MIN or sol.status == "numerical-failure":
                diag.note = f"solver stopped: {sol.status}"
                break
            omega = min(1.0, lam_ratio + delta)
            continue
        resumed = False
        if sol.backend == "scs":
            warm_raw = sol.raw

        scal = prob.scaling
        rho_n = np.clip(sol.values["rho"], scen.rho_min, 1.0)
        if rho_fix is not None:
            rho_n = np.full(K, float(rho_fix))
        if not freeze_V:
            V = sol.values["V"]
            lam_ratio = _rank1_quality(V)
        zt = sol.values["z"]
        c_new = np.array([max(lifted_gain(G[k], V), scen.sigma2 * GAIN_FLOOR_REL)
                          for k in range(K)])
        # true z^2 = zhat^2 * (c_warm * p0); p = z^2 / Tr(G V_new)
        p = np.clip(scal["p0"] * zt ** 2 * scal["c"] / c_new, 0.0, scen.p_max)
        rho = rho_n
        E_model = sol.obj_val * scal["E0"]
        diag.trace.append((omega, lam_ratio, E_model, sol.status))

        # candidate recovery: exact powers at the extracted phases
        if freeze_V:
            bf_c, how = bf0, "frozen-phase"
        else:
            bf_c, how = extract_rank_one(V, context=(scen, ch, order, rho), rng=rng)
        cand = _repair_and_evaluate(scen, ch, order, perm, bf_c, rho)
        if cand is not None and cand[0] < best:
            best = cand[0]
            best_bf = bf_c
            best_cfg = sysmodel.SemanticConfig(rho=rho.copy(), p=cand[1])
            diag.recovery = how

        if freeze_V:
            # plain QT alternation; stop when the model value settles
            if len(diag.trace) >= 2 and np.isfinite(diag.trace[-2][2]):
                if abs(diag.trace[-2][2] - E_model) <= 1e-6 * max(abs(E_model), 1e-9):
                    diag.converged = True
                    break
            continue
        if omega >= 1.0 - 1e-9 and lam_ratio >= 1.0 - RANK1_TOL:
            diag.converged = True
            break
        omega = min(1.0, lam_ratio + delta)

    # loose-accuracy endgame can leave lambda_1/Tr shy of the bar: polish once
    if (not freeze_V and 2 * n > IPM_EMBED_LIMIT and np.isfinite(best)
            and lam_ratio < 1.0 - RANK1_TOL * 0.5 and warm_raw is not None):
        diag.note += " polish"
        c = np.array([lifted_gain(G[k], V) for k in range(K)])
        state = QtState(y=np.zeros(K), z=np.sqrt(np.maximum(c * p, 0.0)),
                        gamma_hat=np.zeros(K), G=G)
        state.y = qt_update_y(state, V, p, order, scen.sigma2)
        state.gamma_hat = lifted_sinr(state, V, p, order, scen.sigma2)
        srocr = SrocrState(omega=1.0, e=_principal(V), delta=delta, V=V)
        prob = build_sdp(state, srocr, order, scen, rho0=rho, rho_fix=rho_fix)
        early, _ = _scs_iter_caps(2 * n)
        sol = prob.solve(SolveOptions(backend="scs", eps=SCS_POLISH_EPS,
                                      max_iters=2 * early, warm=warm_raw))
        diag.solves += 1
        if sol.ok:
            V = sol.values["V"]
            lam_ratio = _rank1_quality(V)
            rho = np.clip(sol.values["rho"], scen.rho_min, 1.0)
            if rho_fix is not None:
                rho = np.full(K, float(rho_fix))
            bf_c, how = extract_rank_one(V, context=(scen, ch, order, rho), rng=rng)
            cand = _repair_and_evaluate(scen, ch, order, perm, bf_c, rho)
            if cand is not None and cand[0] < best:
                best, best_bf = cand[0], bf_c
                best_cfg = sysmodel.SemanticConfig(rho=rho.copy(), p=cand[1])
                diag.recovery = how

    diag.rank1_quality = 1.0 if freeze_V else lam_ratio
    report = sysmodel.check_feasibility(scen, ch, best_bf, best_cfg, order)
    if not report.passed:
        diag.degraded = True
        bad = "; ".join(f"{e.family}: {e.detail}" for e in report.entries
                        if not e.passed)
        diag.note = (diag.note + " recovery degraded: " + bad).strip()
        return bf0, cfg0, diag
    if not freeze_V and any(np.isfinite(t[2]) for t in diag.trace):
        diag.resume = dict(V=V, warm_raw=warm_raw, perm=tuple(perm),
                           rho_fix=rho_fix)
    return best_bf, best_cfg, diag


def min_powers_conic(scen, ch, bf, rho, order):
    """Power-only LP at fixed (order, rho, theta).

    Cross-check against the closed-form back-substitution: minimize total
    transmit power subject to each SU's SINR target and the power cap.
    Solved in received-SNR units (q_k = p_k |h_k|^2 / sigma2) so the LP is
    well scaled. Returns (powers, feasible, reason) like backsub_powers.
    """
    from . import oracle
    K = scen.K
    gains = sysmodel.channel_gains(ch, bf)
    targets = oracle.sinr_targets(scen, rho)
    s2 = ch.sigma2

    prob = ConicProblem("power-only")
    q = prob.real_var("q", K, lb=0.0)
    for k in range(K):
        if gains[k] <= 0.0:
            if targets[k] > 0.0:
                return np.zeros(K), False, \
                    f"SU{k}: zero channel gain with positive demand"
            prob.add_eq(q[k], 0.0)
            continue
        expr = q[k] * (-1.0)
        for kp in range(K):
            if kp != k and order.pi[k, kp] > 0.5:
                expr = expr + q[kp] * float(targets[k])
        prob.add_ineq(expr, -float(targets[k]))
        prob.add_ineq(q[k], scen.p_max * gains[k] / s2)
    obj = LinExpr.constant(0.0)
    gmax = float(np.max(gains))
    for k in range(K):
        if gains[k] > 0.0:
            obj = obj + q[k] * (gmax / gains[k])
    prob.minimize(obj)
    sol = prob.solve(SolveOptions(backend="clarabel", eps=1e-9))
    if not sol.ok:
        return np.zeros(K), False, f"power LP: {sol.status}"
    p = np.asarray(sol.values["q"]) * s2 / np.where(gains > 0.0, gains, 1.0)
    return p, True, ""


def _principal(V):
    _, U = np.linalg.eigh(V)
    return U[:, -1]


def _rank1_quality(V):
    lam = np.linalg.eigvalsh(V)
    return float(lam[-1] / max(np.real(np.trace(V)), 1e-300))


def _evaluate(scen, ch, order, bf, rho, p):
    cfg = sysmodel.SemanticConfig(rho=rho, p=p)
    if not sysmodel.check_feasibility(scen, ch, bf, cfg, order).passed:
        return np.inf
    return sysmodel.total_energy(scen, cfg).E_o


def _repair_and_evaluate(scen, ch, order, perm, bf, rho):
    """Exact minimum powers at the extracted phases; None when infeasible."""
    from . import oracle
    gains = sysmodel.channel_gains(ch, bf)
    targets = oracle.sinr_targets(scen, rho)
    p, ok, _ = oracle.backsub_powers(gains, targets, ch.sigma2, perm, scen.p_max)
    if not ok:
        return None
    return sysmodel.total_energy(scen, sysmodel.SemanticConfig(rho=rho, p=p)).E_o, p
