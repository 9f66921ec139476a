"""System configuration and the scenario key-value file format.

Powers are stored in watts internally.  The scenario file accepts either
watts (``p_d_w``) or dBm (``p_d_dbm``); noise can be given directly
(``sigma_d2_w`` / ``sigma_d2_dbm``) or derived from a noise power spectral
density ``noise_psd_dbm_hz`` and the bandwidth, which is the default:
sigma^2 = noise_psd + 10*log10(bandwidth) dBm.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def watts_to_dbm(w: float) -> float:
    if w <= 0:
        raise ValueError("power must be positive")
    return 10.0 * np.log10(w * 1000.0)


DEFAULT_NOISE_PSD_DBM_HZ = -170.0


@dataclass
class SystemConfig:
    """Static description of one simulated network.

    Geometry follows a fixed BS and RIS with users drawn uniformly in an
    axis-aligned box ``user_region`` = (xmin, xmax, ymin, ymax, zmin, zmax).
    """

    M: int = 8                      # BS antennas
    N: int = 128                    # RIS elements
    K: int = 32                     # users in the scheduling pool
    P_d: float = dbm_to_watts(15.0)     # downlink power budget (W)
    P_u: float = dbm_to_watts(15.0)     # uplink pilot power (W)
    sigma_d2: float = 1e-13         # downlink noise power (W); -100 dBm at 10 MHz
    sigma_u2: float = 1e-13         # uplink noise power (W)
    bandwidth: float = 10e6         # Hz
    epsilon: float = 10.0           # Rician factor of the reflected links
    gamma: float = 0.01             # forgetting factor of the rate average
    Upsilon: int = 50               # scheduling slots per coherence period
    D_theta: int = 6                # pilot sub-frames for scheduling/RIS design
    D_beta: int = 1                 # sub-frames fed to the scheduling stage (prefix)
    D_W: int = 1                    # extra sub-frames per slot for beamforming CSI
    phase_bits: int | None = None   # RIS phase resolution; None = continuous
    bs_pos: tuple[float, float, float] = (100.0, -100.0, 0.0)
    ris_pos: tuple[float, float, float] = (0.0, 0.0, 0.0)
    user_region: tuple[float, float, float, float, float, float] = (
        5.0, 45.0, -35.0, 70.0, -20.0, -20.0)
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.N < 1 or self.K < 1:
            raise ValueError("M, N, K must all be >= 1")
        if self.D_beta > self.D_theta:
            raise ValueError("D_beta must not exceed D_theta")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        for name in ("P_d", "P_u", "sigma_d2", "sigma_u2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.Upsilon < 1:
            raise ValueError("Upsilon must be >= 1")
        if self.D_theta < 1 or self.D_W < 0:
            raise ValueError("D_theta >= 1 and D_W >= 0 required")
        if self.phase_bits is not None and self.phase_bits < 1:
            raise ValueError("phase_bits must be >= 1 when set")
        lo_hi = self.user_region
        if len(lo_hi) != 6 or any(lo_hi[2 * i] > lo_hi[2 * i + 1] for i in range(3)):
            raise ValueError("user_region must be (xmin,xmax,ymin,ymax,zmin,zmax)")


@dataclass
class OptimParams:
    """Hyperparameters of the continuous optimizers and the greedy loop.

    None of these are dictated by the physics; they are overridable through
    scenario file keys of the same name.
    """

    wmmse_max_iter: int = 200
    wmmse_tol: float = 1e-8
    rcg_max_iter: int = 500
    rcg_tol: float = 1e-6
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    bcd_max_outer: int = 20
    bcd_tol: float = 1e-6           # relative objective improvement threshold
    stats_ensemble_factor: int = 10  # calibration samples per target dimension
    D_H: int | None = None           # baseline estimation sub-frames; None = D_theta


@dataclass
class Scenario:
    system: SystemConfig = field(default_factory=SystemConfig)
    optim: OptimParams = field(default_factory=OptimParams)


_VEC_KEYS = {"bs_pos", "ris_pos", "user_region"}
_INT_KEYS = {"m", "n", "k", "upsilon", "d_theta", "d_beta", "d_w", "seed",
             "phase_bits", "wmmse_max_iter", "rcg_max_iter", "bcd_max_outer",
             "stats_ensemble_factor", "d_h"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in _VEC_KEYS:
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    if raw.lower() in ("none", ""):
        return None
    if key in _INT_KEYS:
        return int(raw)
    return float(raw)


def load_scenario(path) -> Scenario:
    """Parse a ``key = value`` scenario file into a :class:`Scenario`.

    Lines starting with ``#`` are comments.  Unknown keys raise, so typos
    do not silently fall back to defaults.
    """
    sys_kw: dict = {}
    opt_kw: dict = {}
    noise_psd = None
    bw = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = line.split("=", 1)
            key = key.strip().lower()
            val = _parse_value(key, raw)
            if key in ("m", "n", "k"):
                sys_kw[key.upper()] = val
            elif key in ("upsilon",):
                sys_kw["Upsilon"] = val
            elif key in ("d_theta", "d_beta", "d_w"):
                sys_kw["D_" + key[2:] if key != "d_w" else "D_W"] = val
            elif key in ("p_d_w", "p_u_w"):
                sys_kw[key[:-2].replace("p_", "P_")] = val
            elif key in ("p_d_dbm", "p_u_dbm"):
                sys_kw[key[:-4].replace("p_", "P_")] = dbm_to_watts(val)
            elif key in ("sigma_d2_w", "sigma_u2_w"):
                sys_kw[key[:-2]] = val
            elif key in ("sigma_d2_dbm", "sigma_u2_dbm"):
                sys_kw[key[:-4]] = dbm_to_watts(val)
            elif key == "noise_psd_dbm_hz":
                noise_psd = val
            elif key == "bandwidth":
                bw = float(val)
                sys_kw["bandwidth"] = bw
            elif key in ("epsilon", "gamma", "seed", "phase_bits"):
                sys_kw[key] = val
            elif key in _VEC_KEYS:
                sys_kw[key] = val
            elif key == "d_h":
                opt_kw["D_H"] = val
            elif key in ("wmmse_max_iter", "wmmse_tol", "rcg_max_iter", "rcg_tol",
                         "armijo_c", "armijo_shrink", "bcd_max_outer", "bcd_tol",
                         "stats_ensemble_factor"):
                opt_kw[key] = val
            else:
                raise ValueError(f"{path}:{lineno}: unknown key '{key}'")

    if noise_psd is not None or ("sigma_d2" not in sys_kw and bw is not None):
        psd = DEFAULT_NOISE_PSD_DBM_HZ if noise_psd is None else noise_psd
        bw = bw if bw is not None else SystemConfig.bandwidth
        noise_w = dbm_to_watts(psd + 10.0 * np.log10(bw))
        sys_kw.setdefault("sigma_d2", noise_w)
        sys_kw.setdefault("sigma_u2", noise_w)

    return Scenario(system=SystemConfig(**sys_kw), optim=OptimParams(**opt_kw))


def save_scenario(scenario: Scenario, path) -> None:
    """Write a scenario file readable by :func:`load_scenario`."""
    cfg, opt = scenario.system, scenario.optim
    lines = [
        "# scenario file: key = value, '#' starts a comment",
        f"m = {cfg.M}",
        f"n = {cfg.N}",
        f"k = {cfg.K}",
        f"p_d_dbm = {watts_to_dbm(cfg.P_d):.10g}",
        f"p_u_dbm = {watts_to_dbm(cfg.P_u):.10g}",
        f"sigma_d2_w = {cfg.sigma_d2:.17g}",
        f"sigma_u2_w = {cfg.sigma_u2:.17g}",
        f"bandwidth = {cfg.bandwidth:.17g}",
        f"epsilon = {cfg.epsilon:.17g}",
        f"gamma = {cfg.gamma:.17g}",
        f"upsilon = {cfg.Upsilon}",
        f"d_theta = {cfg.D_theta}",
        f"d_beta = {cfg.D_beta}",
        f"d_w = {cfg.D_W}",
        f"phase_bits = {cfg.phase_bits if cfg.phase_bits is not None else 'none'}",
        "bs_pos = " + " ".join(f"{v:.17g}" for v in cfg.bs_pos),
        "ris_pos = " + " ".join(f"{v:.17g}" for v in cfg.ris_pos),
        "user_region = " + " ".join(f"{v:.17g}" for v in cfg.user_region),
        f"seed = {cfg.seed}",
    ]
    defaults = OptimParams()
    for f_ in fields(OptimParams):
        val = getattr(opt, f_.name)
        if val != getattr(defaults, f_.name):
            name = "d_h" if f_.name == "D_H" else f_.name
            lines.append(f"{name} = {val}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
