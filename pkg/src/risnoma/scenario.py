"""Scenario configuration and channel generation.

Everything the optimizer consumes is collected in a NetworkScenario:
geometry (AP, RIS, semantic users), RIS size, traffic sizes, power and
semantic-compression bounds, energy coefficients, and the propagation
model. Channels are generated reproducibly from the scenario seed.

Config files are INI-style (see ``docs in README``), powers given in dBm
and converted to watts on load. Unset keys fall back to the defaults
below. The environment variable ``RSN_SEED`` overrides the config seed.
"""

import configparser
import os
from dataclasses import dataclass, replace

import numpy as np

SCHEMA_VERSION = 1

# reference distance for the L0 path-loss anchor (m)
REF_DISTANCE_M = 1.0

FADING_MODELS = ("deterministic-los", "rician")

# Rician factor on RIS links, in dB
RICIAN_K_DB = 3.0


def dbm_to_watt(x_dbm):
    return 10.0 ** (x_dbm / 10.0) * 1e-3


@dataclass(frozen=True)
class NetworkScenario:
    """Immutable description of one network instance.

    Positions are 2-D coordinates in meters. Per-user arrays have length K.
    pathloss_exp holds the (AP-SU, AP-RIS, RIS-SU) exponents.
    """
    ap_pos: tuple = (0.0, 0.0)
    ris_pos: tuple = (5.0, 0.0)
    su_pos: tuple = ((6.0, 2.0), (8.0, 1.5), (8.0, 2.0))
    L: int = 20
    Q: tuple = None          # raw data sizes (bits), per SU
    p_max: float = dbm_to_watt(40.0)      # W
    rho_min: float = 0.2
    tau: float = 1.0         # transmit duration (s)
    S_min: float = 1e3       # decoding floor (bits)
    kappa: float = 1e-21     # compute-energy coefficient
    a: float = 100.0         # extraction cycles/bit coefficient
    alpha_e: float = 4.0
    b: float = 200.0         # recovery cycles/bit coefficient
    alpha_r: float = 1.0
    f: tuple = None          # SU compute capacity (cycles/s), per SU
    g: float = 1e9           # AP compute capacity (cycles/s)
    sigma2: float = dbm_to_watt(-80.0)    # noise power (W)
    L0_dB: float = 30.0
    pathloss_exp: tuple = (3.5, 2.2, 2.2)
    fading: str = "deterministic-los"
    seed: int = 0
    eta: float = 1e-3        # convergence threshold (J)
    rho_fixed: float = 0.6   # frozen extraction factor for the fixed-semantic scheme

    def __post_init__(self):
        K = len(self.su_pos)
        if self.Q is None:
            object.__setattr__(self, "Q", (1e4,) * K)
        if self.f is None:
            object.__setattr__(self, "f", (5e8,) * K)
        if len(self.Q) == 1 and K > 1:
            object.__setattr__(self, "Q", tuple(self.Q) * K)
        if len(self.f) == 1 and K > 1:
            object.__setattr__(self, "f", tuple(self.f) * K)
        self.validate()

    @property
    def K(self):
        return len(self.su_pos)

    def validate(self):
        def bad(fieldname, msg):
            raise ValueError(f"{fieldname} {msg}")

        if self.K < 1:
            bad("su_pos", "must contain at least one SU")
        if self.L < 1:
            bad("L", "out of range (need L >= 1)")
        if not (0.0 < self.rho_min <= 1.0):
            bad("rho_min", "out of range (need 0 < rho_min <= 1)")
        if self.p_max <= 0:
            bad("p_max", "out of range (need p_max > 0)")
        if self.tau <= 0:
            bad("tau", "out of range (need tau > 0)")
        if self.sigma2 <= 0:
            bad("sigma2", "out of range (need sigma2 > 0)")
        if len(self.Q) != self.K:
            bad("Q", f"needs {self.K} entries, got {len(self.Q)}")
        if len(self.f) != self.K:
            bad("f", f"needs {self.K} entries, got {len(self.f)}")
        if any(q <= 0 for q in self.Q):
            bad("Q", "entries must be positive")
        if self.S_min < 0:
            bad("S_min", "out of range (need S_min >= 0)")
        if self.fading not in FADING_MODELS:
            bad("fading", f"unknown model (choose from {FADING_MODELS})")
        if len(self.pathloss_exp) != 3:
            bad("pathloss_exp", "needs 3 entries (AP-SU, AP-RIS, RIS-SU)")
        pts = [self.ap_pos, self.ris_pos] + list(self.su_pos)
        if not all(np.isfinite(c) for p in pts for c in p):
            bad("positions", "must be finite")
        if np.allclose(self.ap_pos, self.ris_pos):
            bad("ris_pos", "RIS and AP must not be co-located")
        if not (0 < self.rho_fixed <= 1.0):
            bad("rho_fixed", "out of range (need 0 < rho_fixed <= 1)")


@dataclass(frozen=True)
class ChannelSet:
    """Complex channels for one realization.

    h_direct[k] is the scalar AP<->SU-k link; H_cascaded[k] is the 1xL row
    combining the AP-RIS and RIS-SU-k links elementwise, so the equivalent
    channel is H_cascaded[k] @ theta + h_direct[k].
    """
    h_direct: np.ndarray      # (K,) complex
    H_cascaded: np.ndarray    # (K, L) complex
    sigma2: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.h_direct)):
            raise ValueError("h_direct has non-finite entries")
        if not np.all(np.isfinite(self.H_cascaded)):
            raise ValueError("H_cascaded has non-finite entries")
        self.h_direct.setflags(write=False)
        self.H_cascaded.setflags(write=False)

    @property
    def K(self):
        return self.h_direct.shape[0]

    @property
    def L(self):
        return self.H_cascaded.shape[1]


def pathloss_gain(L0_dB, distance_m, exponent):
    """Large-scale power gain 10^(-L0/10) * (d/d_ref)^(-exponent)."""
    d = max(float(distance_m), REF_DISTANCE_M)
    return 10.0 ** (-L0_dB / 10.0) * d ** (-exponent)


def _steering(ris, target, L):
    """RIS array response toward a point (half-wavelength ULA along y).

    The LoS phase ramp across elements is what lets one phase profile
    serve co-located users coherently; without it the rician model
    degenerates into independent random phases per user.
    """
    u = np.asarray(target, dtype=float) - np.asarray(ris, dtype=float)
    d = np.linalg.norm(u)
    sin_aod = 0.0 if d == 0 else u[1] / d
    return np.exp(1j * np.pi * np.arange(L) * sin_aod)


def generate_channels(s: NetworkScenario) -> ChannelSet:
    """Draw one channel realization, deterministic in (scenario, seed)."""
    rng = np.random.default_rng(s.seed)
    ap = np.asarray(s.ap_pos, dtype=float)
    ris = np.asarray(s.ris_pos, dtype=float)
    exp_dir, exp_ar, exp_ru = s.pathloss_exp

    d_ar = np.linalg.norm(ris - ap)
    amp_ar = np.sqrt(pathloss_gain(s.L0_dB, d_ar, exp_ar))

    h_direct = np.zeros(s.K, dtype=complex)
    H_casc = np.zeros((s.K, s.L), dtype=complex)

    # AP-RIS leg is shared by all users
    if s.fading == "deterministic-los":
        h_ar = amp_ar * np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=s.L))
    else:
        k_rice = 10.0 ** (RICIAN_K_DB / 10.0)
        los = _steering(ris, ap, s.L) * np.exp(1j * rng.uniform(0.0, 2 * np.pi))
        nlos = (rng.standard_normal(s.L) + 1j * rng.standard_normal(s.L)) / np.sqrt(2.0)
        h_ar = amp_ar * (np.sqrt(k_rice / (1 + k_rice)) * los
                         + np.sqrt(1.0 / (1 + k_rice)) * nlos)

    for k in range(s.K):
        su = np.asarray(s.su_pos[k], dtype=float)
        d_au = np.linalg.norm(su - ap)
        d_ru = np.linalg.norm(su - ris)
        amp_au = np.sqrt(pathloss_gain(s.L0_dB, d_au, exp_dir))
        amp_ru = np.sqrt(pathloss_gain(s.L0_dB, d_ru, exp_ru))
        if s.fading == "deterministic-los":
            h_direct[k] = amp_au * np.exp(1j * rng.uniform(0.0, 2 * np.pi))
            h_ru = amp_ru * np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=s.L))
        else:
            k_rice = 10.0 ** (RICIAN_K_DB / 10.0)
            h_direct[k] = amp_au * (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2.0)
            los = _steering(ris, su, s.L) * np.exp(1j * rng.uniform(0.0, 2 * np.pi))
            nlos = (rng.standard_normal(s.L) + 1j * rng.standard_normal(s.L)) / np.sqrt(2.0)
            h_ru = amp_ru * (np.sqrt(k_rice / (1 + k_rice)) * los
                             + np.sqrt(1.0 / (1 + k_rice)) * nlos)
        H_casc[k] = h_ar * h_ru

    return ChannelSet(h_direct=h_direct, H_cascaded=H_casc, sigma2=s.sigma2)


# ----------------------------------------------------------------- config IO

def _parse_pos(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'x,y', got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _parse_pos_list(text):
    return tuple(_parse_pos(chunk) for chunk in text.split(";") if chunk.strip())


def _parse_floats(text):
    return tuple(float(p) for p in text.split(",") if p.strip())


def load_scenario(path) -> NetworkScenario:
    """Load and validate a scenario config file.

    Raises ValueError naming the offending field on parse or invariant
    failure. Missing keys keep the defaults of NetworkScenario.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = cp.read(path)
    if not read:
        raise ValueError(f"config file not found or unreadable: {path}")
    if not cp.has_section("scenario"):
        raise ValueError("config missing [scenario] section")
    sec = cp["scenario"]

    version = sec.getint("schema_version", fallback=SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"schema_version {version} unsupported (expected {SCHEMA_VERSION})")

    kw = {}

    def take(key, conv, dest=None):
        if key in sec:
            try:
                kw[dest or key] = conv(sec.get(key))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{key}: {exc}") from exc

    take("ap_pos", _parse_pos)
    take("ris_pos", _parse_pos)
    take("su_pos", _parse_pos_list)
    take("L", int)
    take("Q_bits", _parse_floats, "Q")
    take("p_max_dbm", lambda v: dbm_to_watt(float(v)), "p_max")
    take("rho_min", float)
    take("tau_s", float, "tau")
    take("S_min_bits", float, "S_min")
    take("kappa", float)
    take("a", float)
    take("alpha_e", float)
    take("b", float)
    take("alpha_r", float)
    take("f_cycles", _parse_floats, "f")
    take("g_cycles", float, "g")
    take("sigma2_dbm", lambda v: dbm_to_watt(float(v)), "sigma2")
    take("L0_dB", float)
    take("pathloss_exp", _parse_floats)
    take("fading", str.strip)
    take("seed", int)
    take("eta", float)
    take("rho_fixed", float)

    scen = NetworkScenario(**kw)

    env_seed = os.environ.get("RSN_SEED")
    if env_seed is not None:
        try:
            scen = replace(scen, seed=int(env_seed))
        except ValueError as exc:
            raise ValueError(f"RSN_SEED: {exc}") from exc
    return scen
