"""Geometric fading channels of the RIS-assisted downlink.

One :class:`ChannelRealization` holds, for a single coherence period, the
direct BS->user channels ``h_d`` (Rayleigh), the RIS->user channels ``h_r``
and the BS->RIS matrix ``G`` (both Rician), and the per-user cascades
``A_k = G @ diag(h_r_k)``.  The effective downlink channel under an RIS
configuration ``theta`` is ``h_d_k + A_k @ theta``.

Modeling choices not tied down by the propagation constants: the BS is a
uniform linear array along the y axis and the RIS a uniform rectangular
array in the y-z plane, both at half-wavelength spacing; the line-of-sight
component of each reflected link is the steering vector (outer product for
``G``) of the corresponding geometry.  All entries of the LOS factors are
unit modulus, so the Rician power split is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig

LOG2 = np.log(2.0)


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic child RNG for a (seed, purpose...) path.

    Used to give every coherence period / subsystem its own independent
    stream so realizations can be generated in parallel yet reproducibly.
    """
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(k) for k in key)))


def crandn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """CN(0, 1) i.i.d. samples (unit total variance per entry)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def pathloss_gain(d: float, path: str) -> float:
    """Linear power gain 10^(-PL/10) of one link.

    PL = 32.6 + 36.7*log10(d) dB on the direct path and
    PL = 30 + 22*log10(d) dB on each reflected segment, d in meters.
    The amplitude gain is the square root, applied once per segment.
    """
    if d <= 0:
        raise ValueError("distance must be positive")
    if path == "direct":
        pl_db = 32.6 + 36.7 * np.log10(d)
    elif path == "reflected":
        pl_db = 30.0 + 22.0 * np.log10(d)
    else:
        raise ValueError(f"unknown path kind '{path}'")
    return float(10.0 ** (-pl_db / 10.0))


def _ura_shape(n: int) -> tuple[int, int]:
    """Largest divisor pair (n1, n2) with n1 <= sqrt(n); prime n degrades to a line."""
    n1 = int(np.sqrt(n))
    while n % n1:
        n1 -= 1
    return n1, n // n1


def bs_steering(m: int, unit_dir: np.ndarray) -> np.ndarray:
    """ULA along the y axis, half-wavelength spacing."""
    return np.exp(1j * np.pi * np.arange(m) * unit_dir[1])


def ris_steering(n: int, unit_dir: np.ndarray) -> np.ndarray:
    """URA in the y-z plane, half-wavelength spacing, row-major over (y, z)."""
    n1, n2 = _ura_shape(n)
    phase = np.pi * (np.arange(n1)[:, None] * unit_dir[1]
                     + np.arange(n2)[None, :] * unit_dir[2])
    return np.exp(1j * phase).reshape(n)


@dataclass
class ChannelRealization:
    """All channels of one coherence period.

    h_d: (K, M) direct channels, h_r: (K, N) RIS-user channels,
    G: (M, N) BS-RIS matrix, A: (K, M, N) cascades G @ diag(h_r_k).
    """

    h_d: np.ndarray
    h_r: np.ndarray
    G: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        for name in ("h_d", "h_r", "G", "A"):
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"{name} contains non-finite entries")
        K, M = self.h_d.shape
        N = self.h_r.shape[1]
        if self.G.shape != (M, N) or self.A.shape != (K, M, N):
            raise ValueError("inconsistent channel shapes")

    @property
    def num_users(self) -> int:
        return self.h_d.shape[0]


@dataclass
class RisConfig:
    """Unit-modulus reflection coefficients theta, length N."""

    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.complex128)
        if self.theta.ndim != 1:
            raise ValueError("theta must be a vector")
        if np.max(np.abs(np.abs(self.theta) - 1.0)) > 1e-12:
            raise ValueError("theta entries must have unit modulus")


@dataclass
class BeamMatrix:
    """Beamforming matrix, one column per scheduled user."""

    W: np.ndarray
    total_power: float = 0.0

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.complex128)
        if self.W.ndim != 2:
            raise ValueError("W must be M x |S|")
        self.total_power = float(np.sum(np.abs(self.W) ** 2))

    def check_power(self, p_d: float, tol: float = 1e-9) -> None:
        if self.total_power > p_d + tol:
            raise ValueError(f"beam power {self.total_power} exceeds budget {p_d}")


def random_phases(n: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. uniform unit-modulus phase vector."""
    return np.exp(2j * np.pi * rng.random(n))


def generate_channels(config: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw one coherence period of channels.

    User positions are uniform in ``config.user_region``; the direct link is
    Rayleigh with the direct path loss, the two reflected segments are
    Rician with factor ``config.epsilon``.  The draw order (positions, h_d,
    h_r, G) is fixed and part of the reproducibility contract.
    """
    M, N, K = config.M, config.N, config.K
    bs = np.asarray(config.bs_pos, dtype=float)
    ris = np.asarray(config.ris_pos, dtype=float)
    box = config.user_region
    lo = np.array([box[0], box[2], box[4]])
    hi = np.array([box[1], box[3], box[5]])
    users = lo + (hi - lo) * rng.random((K, 3))

    eps = config.epsilon
    if np.isinf(eps):
        w_los, w_nlos = 1.0, 0.0
    else:
        w_los = np.sqrt(eps / (1.0 + eps))
        w_nlos = np.sqrt(1.0 / (1.0 + eps))

    h_d = np.empty((K, M), dtype=np.complex128)
    h_r = np.empty((K, N), dtype=np.complex128)

    d_bs_user = np.linalg.norm(users - bs, axis=1)
    d_ris_user = np.linalg.norm(users - ris, axis=1)
    rho0 = np.sqrt([pathloss_gain(d, "direct") for d in d_bs_user])
    rho1 = np.sqrt([pathloss_gain(d, "reflected") for d in d_ris_user])

    for k in range(K):
        h_d[k] = rho0[k] * crandn(rng, M)
    for k in range(K):
        u = (users[k] - ris) / d_ris_user[k]
        los = ris_steering(N, u)
        h_r[k] = rho1[k] * (w_los * los + w_nlos * crandn(rng, N))

    d_bs_ris = np.linalg.norm(bs - ris)
    rho2 = np.sqrt(pathloss_gain(d_bs_ris, "reflected"))
    u_bs = (ris - bs) / d_bs_ris
    g_los = np.outer(bs_steering(M, u_bs), ris_steering(N, -u_bs).conj())
    G = rho2 * (w_los * g_los + w_nlos * crandn(rng, M, N))

    A = G[None, :, :] * h_r[:, None, :]
    return ChannelRealization(h_d=h_d, h_r=h_r, G=G, A=A)


def effective_channel(h_d_k: np.ndarray, A_k: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Combined channel h_d_k + A_k @ theta of one user."""
    h_d_k = np.asarray(h_d_k)
    A_k = np.asarray(A_k)
    theta = np.asarray(theta)
    if A_k.shape != (h_d_k.shape[0], theta.shape[0]):
        raise ValueError("dimension mismatch between h_d, A and theta")
    return h_d_k + A_k @ theta


def effective_channels(realization: ChannelRealization, theta: np.ndarray,
                       users=None) -> np.ndarray:
    """Stacked effective channels, shape (len(users), M)."""
    if users is None:
        users = range(realization.num_users)
    return np.stack([effective_channel(realization.h_d[k], realization.A[k], theta)
                     for k in users])


def rates_from_links(h_c: np.ndarray, W: np.ndarray, sigma_d2: float) -> np.ndarray:
    """Per-user rates log2(1 + SINR) for stacked effective channels.

    h_c is (U, M) with one row per served user, W is (M, U) with the
    matching beam columns.  Hermitian inner products h^H w throughout.
    """
    if sigma_d2 <= 0:
        raise ValueError("noise power must be positive")
    cross = np.abs(h_c.conj() @ W) ** 2        # cross[k, i] = |h_k^H w_i|^2
    sig = np.diag(cross)
    interf = cross.sum(axis=1) - sig + sigma_d2
    return np.log2(1.0 + sig / interf)


def weighted_sum_rate(h_c: np.ndarray, W: np.ndarray, alpha: np.ndarray,
                      sigma_d2: float) -> float:
    return float(alpha @ rates_from_links(h_c, W, sigma_d2))


def achievable_rates(realization: ChannelRealization, theta: np.ndarray,
                     W: np.ndarray, schedule, sigma_d2: float) -> np.ndarray:
    """Rates of all K users; unscheduled users get exactly zero.

    ``W`` columns are aligned with ``schedule.users``.
    """
    users = list(schedule.users)
    if W.shape[1] != len(users):
        raise ValueError("beam columns must align with the schedule")
    rates = np.zeros(realization.num_users)
    if users:
        h_c = effective_channels(realization, theta, users)
        rates[users] = rates_from_links(h_c, W, sigma_d2)
    return rates
