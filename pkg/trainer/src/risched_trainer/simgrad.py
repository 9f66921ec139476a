"""Batched channel/pilot generation (numpy) and differentiable rates (torch).

Channel model: Rayleigh direct links with 32.6 + 36.7 log10(d) dB path
loss; Rician reflected links (factor epsilon) with 30 + 22 log10(d) dB per
segment, LOS terms from half-wavelength steering vectors (BS: linear array
along y, RIS: rectangular array in the y-z plane).  Pilot observations are
generated directly in decorrelated form: y_k^(d) = h_d_k + A_k theta^(d)
+ noise with per-entry variance sigma_u^2 / (K P_u).

Channels are data (no gradient); the rate computation is a torch graph so
the unsupervised losses backpropagate into the network outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .scenario import TrainScenario


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(k) for k in key)))


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def pathloss_amp(d, direct: bool):
    pl_db = 32.6 + 36.7 * np.log10(d) if direct else 30.0 + 22.0 * np.log10(d)
    return 10.0 ** (-pl_db / 20.0)


def _ura_shape(n: int):
    n1 = int(np.sqrt(n))
    while n % n1:
        n1 -= 1
    return n1, n // n1


def _ris_steering(n: int, unit_dir: np.ndarray) -> np.ndarray:
    # unit_dir: (..., 3); returns (..., n)
    n1, n2 = _ura_shape(n)
    i = np.arange(n1)[:, None]
    j = np.arange(n2)[None, :]
    phase = np.pi * (i[None] * unit_dir[..., 1, None, None]
                     + j[None] * unit_dir[..., 2, None, None])
    return np.exp(1j * phase).reshape(unit_dir.shape[:-1] + (n,))


@dataclass
class Batch:
    """One training batch: channels, decorrelated pilots, weights."""

    h_d: np.ndarray        # (B, K, M)
    A: np.ndarray          # (B, K, M, N)
    Y: np.ndarray          # (B, K, M, D) decorrelated pilot columns
    phases: np.ndarray     # (B, D, N) uplink RIS draws
    alpha: np.ndarray      # (B, K)


def generate_batch(sc: TrainScenario, B: int, D: int, rng: np.random.Generator,
                   alpha_range=(0.1, 2.0)) -> Batch:
    M, N, K = sc.M, sc.N, sc.K
    bs = np.asarray(sc.bs_pos)
    ris = np.asarray(sc.ris_pos)
    box = sc.user_region
    lo = np.array([box[0], box[2], box[4]])
    hi = np.array([box[1], box[3], box[5]])
    users = lo + (hi - lo) * rng.random((B, K, 3))

    eps = sc.epsilon
    if np.isinf(eps):
        w_los, w_nlos = 1.0, 0.0
    else:
        w_los = np.sqrt(eps / (1.0 + eps))
        w_nlos = np.sqrt(1.0 / (1.0 + eps))

    d_bu = np.linalg.norm(users - bs, axis=-1)
    d_ru = np.linalg.norm(users - ris, axis=-1)
    rho0 = pathloss_amp(d_bu, True)
    rho1 = pathloss_amp(d_ru, False)
    h_d = rho0[..., None] * crandn(rng, B, K, M)

    u_ru = (users - ris) / d_ru[..., None]
    los_r = _ris_steering(N, u_ru)
    h_r = rho1[..., None] * (w_los * los_r + w_nlos * crandn(rng, B, K, N))

    d_br = np.linalg.norm(bs - ris)
    rho2 = pathloss_amp(d_br, False)
    u_br = (ris - bs) / d_br
    a_bs = np.exp(1j * np.pi * np.arange(M) * u_br[1])
    g_los = np.outer(a_bs, _ris_steering(N, -u_br).conj())
    G = rho2 * (w_los * g_los[None] + w_nlos * crandn(rng, B, M, N))

    A = G[:, None, :, :] * h_r[:, :, None, :]

    phases = np.exp(2j * np.pi * rng.random((B, D, N)))
    h_eff = h_d[:, :, :, None] + np.einsum("bkmn,bdn->bkmd", A, phases)
    noise_var = sc.sigma_u2 / (K * sc.P_u)
    Y = h_eff + np.sqrt(noise_var) * crandn(rng, B, K, M, D)

    alpha = alpha_range[0] + (alpha_range[1] - alpha_range[0]) * rng.random((B, K))
    return Batch(h_d=h_d, A=A, Y=Y, phases=phases, alpha=alpha)


def build_raw_features(alpha: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """[alpha_k; vec(Re Y_k); vec(Im Y_k)], Y vectorized column-major (M x D).

    alpha (B, U), Y (B, U, M, D) -> float64 (B, U, 1 + 2MD).
    """
    B, U, M, D = Y.shape
    # column-major vec of (M, D): sub-frame index varies slowest
    flat = np.transpose(Y, (0, 1, 3, 2)).reshape(B, U, M * D)
    return np.concatenate([alpha[..., None], flat.real, flat.imag], axis=-1)


def fit_norm_constants(raw: np.ndarray):
    """Per-coordinate standardization constants from a calibration batch."""
    flat = raw.reshape(-1, raw.shape[-1])
    mean = flat.mean(axis=0)
    scale = np.maximum(flat.std(axis=0), 1e-12)
    return mean.astype(np.float32), scale.astype(np.float32)


def standardize(raw: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return ((raw - mean.astype(np.float64)) / scale.astype(np.float64)).astype(np.float32)


def decode_theta(out0: torch.Tensor, N: int) -> torch.Tensor:
    """(B, 2N) real head -> (B, N) unit-modulus complex, differentiable."""
    c = torch.complex(out0[..., :N].double(), out0[..., N:].double())
    mag = torch.sqrt(c.real ** 2 + c.imag ** 2 + 1e-30)
    return c / mag


def decode_beams(outk: torch.Tensor, M: int, p_d: float) -> torch.Tensor:
    """(B, U, 2M) real heads -> (B, M, U) beams scaled to total power p_d."""
    w = torch.complex(outk[..., :M].double(), outk[..., M:].double())
    total = torch.sum(torch.abs(w) ** 2, dim=(-2, -1), keepdim=True)
    w = w * torch.sqrt(p_d / (total + 1e-300))
    return w.transpose(-2, -1)


def rates(h_c: torch.Tensor, W: torch.Tensor, sigma_d2: float) -> torch.Tensor:
    """log2(1 + SINR) per user; h_c (B, U, M) complex, W (B, M, U)."""
    cross = torch.abs(torch.einsum("bum,bmv->buv", h_c.conj(), W)) ** 2
    sig = torch.diagonal(cross, dim1=-2, dim2=-1)
    interf = cross.sum(dim=-1) - sig + sigma_d2
    return torch.log2(1.0 + sig / interf)


def weighted_rates_loss(batch: Batch, users: np.ndarray, theta: torch.Tensor,
                        W: torch.Tensor, sigma_d2: float) -> torch.Tensor:
    """-E[sum_k alpha_k R_k] over the given per-sample user subsets.

    ``users`` is (B, U) integer indices; channels enter as constants.
    """
    h_d = np.take_along_axis(batch.h_d, users[:, :, None], axis=1)
    A = np.take_along_axis(batch.A, users[:, :, None, None], axis=1)
    h_d_t = torch.from_numpy(np.ascontiguousarray(h_d))
    A_t = torch.from_numpy(np.ascontiguousarray(A))
    h_c = h_d_t + torch.einsum("bumn,bn->bum", A_t, theta)
    alpha = torch.from_numpy(np.take_along_axis(batch.alpha, users, axis=1))
    r = rates(h_c, W, sigma_d2)
    return -(alpha * r).sum(dim=1).mean()
