"""Reader for the shared key-value scenario file format.

Only the keys the trainer needs; powers accepted in watts or dBm.  The
format is the file contract with the simulator CLI, so unknown keys are
tolerated here (the simulator owns the full schema and validates it).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass
class TrainScenario:
    M: int = 2
    N: int = 8
    K: int = 4
    P_d: float = dbm_to_watts(15.0)
    P_u: float = dbm_to_watts(15.0)
    sigma_d2: float = 1e-13
    sigma_u2: float = 1e-13
    epsilon: float = 10.0
    D_theta: int = 3
    D_beta: int = 1
    bs_pos: tuple = (100.0, -100.0, 0.0)
    ris_pos: tuple = (0.0, 0.0, 0.0)
    user_region: tuple = (5.0, 45.0, -35.0, 70.0, -20.0, -20.0)
    seed: int = 0


_VEC = {"bs_pos", "ris_pos", "user_region"}
_INT = {"m", "n", "k", "d_theta", "d_beta", "seed"}


def load_scenario(path) -> TrainScenario:
    sc = TrainScenario()
    bw = 10e6
    psd = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line or "=" not in line:
                continue
            key, raw = (tok.strip() for tok in line.split("=", 1))
            key = key.lower()
            if key in _VEC:
                setattr(sc, key, tuple(float(t) for t in raw.replace(",", " ").split()))
            elif key in _INT:
                setattr(sc, {"m": "M", "n": "N", "k": "K", "d_theta": "D_theta",
                             "d_beta": "D_beta", "seed": "seed"}[key], int(raw))
            elif key == "epsilon":
                sc.epsilon = float(raw)
            elif key in ("p_d_w", "p_u_w"):
                setattr(sc, "P_" + key[2], float(raw))
            elif key in ("p_d_dbm", "p_u_dbm"):
                setattr(sc, "P_" + key[2], dbm_to_watts(float(raw)))
            elif key in ("sigma_d2_w", "sigma_u2_w"):
                setattr(sc, key[:-2], float(raw))
            elif key in ("sigma_d2_dbm", "sigma_u2_dbm"):
                setattr(sc, key[:-4], dbm_to_watts(float(raw)))
            elif key == "bandwidth":
                bw = float(raw)
            elif key == "noise_psd_dbm_hz":
                psd = float(raw)
            # other keys belong to the simulator
    if psd is not None:
        noise = dbm_to_watts(psd + 10.0 * np.log10(bw))
        sc.sigma_d2 = noise
        sc.sigma_u2 = noise
    return sc
