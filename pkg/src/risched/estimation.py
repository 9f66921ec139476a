"""LMMSE channel estimation from decorrelated pilot blocks.

Two targets are supported:

* ``high_dim`` -- the stacked matrix H_k = [h_d_k, A_k] of one user.  Each
  decorrelated column obeys y_k^(d) = H_k q^(d) + n with q^(d) = [1;
  theta^(d)], so every row of H_k sees the same known mixing matrix
  Q = [q^(1) ... q^(D)] and the rows are estimated independently with a
  shared (N+1)-dimensional prior.  This keeps the covariance at (N+1)^2
  instead of (M(N+1))^2.
* ``combined`` -- the M-dimensional effective channel h_c_k observed
  directly (plus noise) under one fixed RIS configuration.  The D_W
  repeated columns are averaged first (noise variance / D_W), then one
  LMMSE combine is applied.

Prior moments come from a seeded calibration ensemble drawn from the same
generator as the deployment; samples are pooled over users (and rows, for
``high_dim``), which are exchangeable under the geometry model.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, derive_rng, generate_channels, random_phases
from .config import SystemConfig
from .pilots import PilotBlock

# Relative ridge on the observation covariance before inversion.  The
# direct and cascaded coordinates differ by orders of magnitude in variance,
# so the inverse amplifies the ridge by the condition number (~1e4 on the
# default geometry); 1e-12 keeps noiseless recovery exact to ~1e-8.
EPS_REG_DEFAULT = 1e-12
_CALIB_TAG = 0x5CA1


@dataclass
class LmmseStats:
    """First and second moments of one estimation target."""

    kind: str                 # "high_dim" or "combined"
    mu: np.ndarray            # (dim,)
    cov: np.ndarray           # (dim, dim), Hermitian PSD
    ensemble_size: int
    eps_reg: float = EPS_REG_DEFAULT

    def __post_init__(self):
        if self.kind not in ("high_dim", "combined"):
            raise ValueError(f"unknown stats kind '{self.kind}'")
        dim = self.mu.shape[0]
        if self.cov.shape != (dim, dim):
            raise ValueError("covariance shape must match the mean")
        if not np.allclose(self.cov, self.cov.conj().T, atol=1e-10 * (1 + _trace(self.cov))):
            raise ValueError("covariance must be Hermitian")
        w = np.linalg.eigvalsh(self.cov)
        if w.min() < -1e-10 * max(w.max(), 1e-300):
            raise ValueError("covariance must be positive semidefinite")

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def _trace(c: np.ndarray) -> float:
    return float(np.trace(c).real)


def high_dim_matrix(realization: ChannelRealization, k: int) -> np.ndarray:
    """H_k = [h_d_k, A_k], shape (M, N+1)."""
    return np.concatenate([realization.h_d[k][:, None], realization.A[k]], axis=1)


def fit_lmmse_stats(realizations, target: str, rng: np.random.Generator | None = None,
                    eps_reg: float = EPS_REG_DEFAULT, min_factor: int = 10) -> LmmseStats:
    """Empirical moments from a calibration ensemble of realizations.

    For ``combined``, one random RIS configuration is drawn per realization
    (``rng`` required) since the deployed configuration is not known at
    calibration time.  Refuses ensembles with fewer than
    ``min_factor * dim`` pooled samples (and never fewer than ``dim``).
    """
    samples = []
    if target == "high_dim":
        for real in realizations:
            for k in range(real.num_users):
                samples.append(high_dim_matrix(real, k))
        X = np.concatenate(samples, axis=0)
    elif target == "combined":
        if rng is None:
            raise ValueError("combined-target calibration needs an rng for the RIS draws")
        for real in realizations:
            theta = random_phases(real.h_r.shape[1], rng)
            samples.append(real.h_d + np.einsum("kmn,n->km", real.A, theta))
        X = np.concatenate(samples, axis=0)
    else:
        raise ValueError(f"unknown target '{target}'")

    return fit_stats_from_samples(X, target, eps_reg=eps_reg, min_factor=min_factor)


def fit_stats_from_samples(X: np.ndarray, target: str,
                           eps_reg: float = EPS_REG_DEFAULT,
                           min_factor: int = 10) -> LmmseStats:
    """Sample mean / covariance over rows of X, shape (n_samples, dim)."""
    n, dim = X.shape
    if n < dim:
        raise ValueError(f"ensemble of {n} samples is smaller than dimension {dim}")
    if n < min_factor * dim:
        raise ValueError(f"need at least {min_factor}x{dim} samples, got {n}")
    mu = X.mean(axis=0)
    Xc = X - mu
    cov = (Xc.T @ Xc.conj()) / n
    cov = 0.5 * (cov + cov.conj().T)
    return LmmseStats(kind=target, mu=mu, cov=cov, ensemble_size=n, eps_reg=eps_reg)


def calibrate_stats(config: SystemConfig, target: str, n_realizations: int | None = None,
                    min_factor: int = 10, eps_reg: float = EPS_REG_DEFAULT) -> LmmseStats:
    """Fit stats on a seeded ensemble derived from ``config.seed``."""
    dim = config.N + 1 if target == "high_dim" else config.M
    per_real = config.K * (config.M if target == "high_dim" else 1)
    if n_realizations is None:
        n_realizations = int(np.ceil(min_factor * dim / per_real))
    reals = (generate_channels(config, derive_rng(config.seed, _CALIB_TAG, i))
             for i in range(n_realizations))
    rng = derive_rng(config.seed, _CALIB_TAG, n_realizations)
    return fit_lmmse_stats(reals, target, rng=rng, eps_reg=eps_reg, min_factor=min_factor)


def _combiner(stats: LmmseStats, C_bb: np.ndarray, C_ab: np.ndarray) -> np.ndarray:
    """F = C_ab C_bb^{-1} with the relative ridge on the regularized inverse."""
    d = C_bb.shape[0]
    reg = stats.eps_reg * _trace(C_bb) / d
    C_bb = C_bb + reg * np.eye(d)
    return np.linalg.solve(C_bb.T, C_ab.T).T


def lmmse_estimate_high_dim(block: PilotBlock, stats: LmmseStats, sigma_u2: float,
                            users=None) -> np.ndarray:
    """Estimates of H_k = [h_d_k, A_k] for the requested users, (U, M, N+1)."""
    if stats.kind != "high_dim":
        raise ValueError("stats were fitted for a different target")
    if block.D < 1:
        raise ValueError("need at least one sub-frame")
    K, M, D = block.Y.shape
    N1 = stats.dim
    if block.uplink_phases.shape[1] != N1 - 1:
        raise ValueError("stats dimension does not match the pilot block")
    users = list(range(K)) if users is None else list(users)
    Q = np.concatenate([np.ones((1, D)), block.uplink_phases.T], axis=0)  # (N+1, D)
    sigma_eff2 = sigma_u2 / block.scale
    C_bb = Q.T @ stats.cov @ Q.conj() + sigma_eff2 * np.eye(D)
    C_ab = stats.cov @ Q.conj()
    F = _combiner(stats, C_bb, C_ab)                     # (N+1, D)
    mu_b = Q.T @ stats.mu
    out = np.empty((len(users), M, N1), dtype=np.complex128)
    for i, k in enumerate(users):
        out[i] = stats.mu[None, :] + (block.Y[k] - mu_b[None, :]) @ F.T
    return out


def combined_from_high_dim(H_hat: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """h_c = H_hat @ [1; theta] for stacked estimates (U, M, N+1) -> (U, M)."""
    q = np.concatenate([[1.0 + 0j], theta])
    return H_hat @ q


def lmmse_estimate_combined(block: PilotBlock, stats: LmmseStats,
                            sigma_u2: float) -> np.ndarray:
    """Estimates of the combined channels h_c_k, shape (U, M).

    Requires every column of the block to have been received under the same
    RIS configuration.
    """
    if stats.kind != "combined":
        raise ValueError("stats were fitted for a different target")
    phases = block.uplink_phases
    if not np.allclose(phases, phases[0][None, :], atol=1e-12):
        raise ValueError("combined estimation requires a fixed RIS configuration")
    U, M, D = block.Y.shape
    if stats.dim != M:
        raise ValueError("stats dimension does not match the pilot block")
    ybar = block.Y.mean(axis=2)                          # (U, M)
    sigma_eff2 = sigma_u2 / block.scale / D
    C_bb = stats.cov + sigma_eff2 * np.eye(M)
    F = _combiner(stats, C_bb, stats.cov)                # (M, M)
    return stats.mu[None, :] + (ybar - stats.mu[None, :]) @ F.T


def stats_cache_key(config: SystemConfig, target: str, ensemble_size: int) -> str:
    """Cache key over everything that shapes the calibration distribution."""
    ident = (target, config.M, config.N, config.K, config.epsilon,
             tuple(config.bs_pos), tuple(config.ris_pos), tuple(config.user_region),
             config.seed, ensemble_size)
    return hashlib.sha1(repr(ident).encode()).hexdigest()[:16]


def save_stats(stats: LmmseStats, path) -> None:
    np.savez(path, kind=stats.kind, mu=stats.mu, cov=stats.cov,
             ensemble_size=stats.ensemble_size, eps_reg=stats.eps_reg)


def load_stats(path) -> LmmseStats:
    with np.load(path) as data:
        return LmmseStats(kind=str(data["kind"]), mu=data["mu"], cov=data["cov"],
                          ensemble_size=int(data["ensemble_size"]),
                          eps_reg=float(data["eps_reg"]))
