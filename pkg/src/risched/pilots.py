"""Uplink pilot protocol: orthogonal pilots over random-phase sub-frames.

All users transmit the same mutually orthogonal length-K pilots in every
sub-frame while the RIS phases change from sub-frame to sub-frame.  The BS
decorrelates each received block against the pilot of user k, leaving the
per-user observation h_d_k + A_k @ theta_d plus reduced noise.

The decorrelated column is divided by x_k^H x_k = K * P_u (not just K), so
it is an unbiased channel observation for any pilot power; the effective
noise is CN(0, sigma_u2 / (K * P_u) * I).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, crandn, effective_channel


def make_pilots(K: int, P_u: float) -> np.ndarray:
    """K x K matrix of orthogonal pilot columns with x_k^H x_k = K * P_u.

    Scaled DFT columns: X[l, k] = sqrt(P_u) * exp(-2j pi l k / K).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    l = np.arange(K)
    return np.sqrt(P_u) * np.exp(-2j * np.pi * np.outer(l, l) / K)


def receive_pilot_block(h_eff: np.ndarray, X: np.ndarray, sigma_u2: float,
                        rng: np.random.Generator) -> np.ndarray:
    """One received sub-frame sum_k h_k x_k^H + noise, shape (M, L).

    h_eff is (U, M) with one effective uplink channel per transmitting user;
    X is (L, U) with the matching pilot columns.
    """
    U, M = h_eff.shape
    if X.shape[1] != U:
        raise ValueError("one pilot column per user required")
    L = X.shape[0]
    noise = np.sqrt(sigma_u2) * crandn(rng, M, L) if sigma_u2 > 0 else 0.0
    return h_eff.T @ X.conj().T + noise


def uplink_receive_subframe(realization: ChannelRealization, theta_d: np.ndarray,
                            X: np.ndarray, sigma_u2: float,
                            rng: np.random.Generator) -> np.ndarray:
    """Received block of one sub-frame under RIS phases ``theta_d``."""
    if theta_d.shape[0] != realization.h_r.shape[1]:
        raise ValueError("theta length must equal the RIS size")
    h_eff = np.stack([effective_channel(realization.h_d[k], realization.A[k], theta_d)
                      for k in range(realization.num_users)])
    return receive_pilot_block(h_eff, X, sigma_u2, rng)


@dataclass
class PilotBlock:
    """Decorrelated pilots: Y[k] is the M x D matrix of user k's columns."""

    Y: np.ndarray               # (K, M, D)
    uplink_phases: np.ndarray   # (D, N) RIS phases used per sub-frame
    D: int
    scale: float                # decorrelation normalization x_k^H x_k

    def __post_init__(self):
        if self.Y.shape[2] != self.D or self.uplink_phases.shape[0] != self.D:
            raise ValueError("column count must match the number of uplink phases")

    def prefix(self, d: int) -> "PilotBlock":
        """First d sub-frames; the scheduling stage reuses this prefix."""
        if not 1 <= d <= self.D:
            raise ValueError("prefix depth out of range")
        return PilotBlock(Y=self.Y[:, :, :d], uplink_phases=self.uplink_phases[:d],
                          D=d, scale=self.scale)

    def select(self, users) -> "PilotBlock":
        """Rows of the given users only (e.g. the scheduled set)."""
        return PilotBlock(Y=self.Y[list(users)], uplink_phases=self.uplink_phases,
                          D=self.D, scale=self.scale)


def decorrelate_collect(raw_blocks, X: np.ndarray,
                        uplink_phases: np.ndarray) -> PilotBlock:
    """Per-user decorrelation y_k^(d) = Y^(d) x_k / (x_k^H x_k) of D blocks."""
    D = len(raw_blocks)
    uplink_phases = np.asarray(uplink_phases)
    if uplink_phases.shape[0] != D:
        raise ValueError("need one uplink phase vector per raw block")
    U = X.shape[1]
    scale = float(np.real(X[:, 0].conj() @ X[:, 0]))
    gram = X.conj().T @ X
    if not np.allclose(gram, scale * np.eye(U), atol=1e-9 * max(scale, 1.0)):
        raise ValueError("pilot matrix is not orthogonal")
    M = raw_blocks[0].shape[0]
    Y = np.empty((U, M, D), dtype=np.complex128)
    for d, block in enumerate(raw_blocks):
        Y[:, :, d] = (block @ X / scale).T
    return PilotBlock(Y=Y, uplink_phases=uplink_phases, D=D, scale=scale)


def transmit_pilot_phase(realization: ChannelRealization, config, D: int,
                         rng: np.random.Generator) -> PilotBlock:
    """Full uplink training phase: D sub-frames under fresh random RIS phases."""
    from .channel import random_phases

    X = make_pilots(config.K, config.P_u)
    phases = np.stack([random_phases(config.N, rng) for _ in range(D)])
    blocks = [uplink_receive_subframe(realization, phases[d], X, config.sigma_u2, rng)
              for d in range(D)]
    return decorrelate_collect(blocks, X, phases)


def pilot_overhead(K: int, D_theta: int, M: int, D_W: int, Upsilon: int) -> int:
    """Total pilot symbols per coherence period: K*D_theta + M*D_W*Upsilon."""
    if min(K, D_theta, M, D_W, Upsilon) < 0:
        raise ValueError("arguments must be non-negative")
    return K * D_theta + M * D_W * Upsilon


def pilot_block_to_csv(block: PilotBlock, path) -> None:
    """Debug/trainer dump: one complex entry per row, real/imag interleaved."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "a", "b", "c", "re", "im"])
        writer.writerow(["scale", 0, 0, 0, f"{block.scale:.17g}", "0"])
        K, M, D = block.Y.shape
        for k in range(K):
            for m in range(M):
                for d in range(D):
                    v = block.Y[k, m, d]
                    writer.writerow(["y", k, m, d, f"{v.real:.17g}", f"{v.imag:.17g}"])
        for d in range(D):
            for n in range(block.uplink_phases.shape[1]):
                v = block.uplink_phases[d, n]
                writer.writerow(["theta", d, n, 0, f"{v.real:.17g}", f"{v.imag:.17g}"])


def pilot_block_from_csv(path) -> PilotBlock:
    y_entries, theta_entries = {}, {}
    scale = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            val = complex(float(row["re"]), float(row["im"]))
            if row["kind"] == "scale":
                scale = val.real
            elif row["kind"] == "y":
                y_entries[(int(row["a"]), int(row["b"]), int(row["c"]))] = val
            elif row["kind"] == "theta":
                theta_entries[(int(row["a"]), int(row["b"]))] = val
    if scale is None or not y_entries:
        raise ValueError("malformed pilot block dump")
    K = 1 + max(k for k, _, _ in y_entries)
    M = 1 + max(m for _, m, _ in y_entries)
    D = 1 + max(d for _, _, d in y_entries)
    N = 1 + max(n for _, n in theta_entries)
    Y = np.zeros((K, M, D), dtype=np.complex128)
    for (k, m, d), v in y_entries.items():
        Y[k, m, d] = v
    phases = np.zeros((D, N), dtype=np.complex128)
    for (d, n), v in theta_entries.items():
        phases[d, n] = v
    return PilotBlock(Y=Y, uplink_phases=phases, D=D, scale=scale)
