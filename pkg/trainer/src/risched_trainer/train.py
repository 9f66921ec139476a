"""Unsupervised training of the scheduling and RIS networks.

Both stages minimize the negative expected weighted sum rate of the rates
realized on the true (simulated) channels:

* scheduling stage -- all K users as nodes, D_beta pilot sub-frames,
  loss over all users; the decoded beam powers later drive the implicit
  schedule.
* RIS stage -- only a scheduled subset (M users by default) as nodes,
  D_theta sub-frames, loss over the scheduled users; the beam head is
  trained but downstream consumers re-optimize beams and keep only theta.

Priority weights are drawn Uniform(0.1, 2] per sample.  Data are generated
fresh every epoch from seeded streams; feature standardization constants
come from a separate calibration batch and are stored with the weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .model import Arch, GraphNet
from .scenario import TrainScenario
from .simgrad import (Batch, build_raw_features, decode_beams, decode_theta,
                      derive_rng, generate_batch, fit_norm_constants, standardize,
                      weighted_rates_loss)

_CAL_TAG = 0xCA11
_HOLD_TAG = 0x401D
_DATA_TAG = 0xDA7A


@dataclass
class TrainResult:
    net: GraphNet
    norm_mean: np.ndarray
    norm_scale: np.ndarray
    epoch_losses: list = field(default_factory=list)
    holdout_before: float = float("nan")
    holdout_after: float = float("nan")


def _all_users(B: int, K: int) -> np.ndarray:
    return np.tile(np.arange(K), (B, 1))


def _random_subsets(rng: np.random.Generator, B: int, K: int, M: int) -> np.ndarray:
    order = np.argsort(rng.random((B, K)), axis=1)
    return np.sort(order[:, : min(M, K)], axis=1)


def _stage_batch_loss(net: GraphNet, sc: TrainScenario, batch: Batch,
                      users: np.ndarray, norm_mean, norm_scale) -> torch.Tensor:
    alpha = np.take_along_axis(batch.alpha, users, axis=1)
    Y = np.take_along_axis(batch.Y, users[:, :, None, None], axis=1)
    feats = standardize(build_raw_features(alpha, Y), norm_mean, norm_scale)
    out0, outk = net(torch.from_numpy(feats))
    theta = decode_theta(out0, sc.N)
    W = decode_beams(outk, sc.M, sc.P_d)
    return weighted_rates_loss(batch, users, theta, W, sc.sigma_d2)


def _run_training(sc: TrainScenario, stage: str, epochs: int, lr: float,
                  samples_per_epoch: int, batch_size: int, hidden: int, Z: int,
                  seed: int, schedules) -> TrainResult:
    D = sc.D_beta if stage == "scheduling" else sc.D_theta
    arch = Arch(M=sc.M, N=sc.N, D=D, Z=Z, g_hidden=hidden, repr_dim=hidden)
    torch.manual_seed(seed)
    net = GraphNet(arch)

    def subsets_for(rng, B):
        if stage == "scheduling":
            return _all_users(B, sc.K)
        if callable(schedules):
            return schedules(rng, B, sc.K, sc.M)
        return _random_subsets(rng, B, sc.K, sc.M)

    cal_rng = derive_rng(seed, _CAL_TAG)
    cal = generate_batch(sc, max(batch_size, 256), D, cal_rng)
    cal_users = subsets_for(cal_rng, cal.h_d.shape[0])
    cal_alpha = np.take_along_axis(cal.alpha, cal_users, axis=1)
    cal_Y = np.take_along_axis(cal.Y, cal_users[:, :, None, None], axis=1)
    norm_mean, norm_scale = fit_norm_constants(build_raw_features(cal_alpha, cal_Y))

    hold_rng = derive_rng(seed, _HOLD_TAG)
    holdout = generate_batch(sc, 512, D, hold_rng)
    holdout_users = subsets_for(hold_rng, 512)

    def holdout_loss() -> float:
        net.eval()
        with torch.no_grad():
            loss = _stage_batch_loss(net, sc, holdout, holdout_users,
                                     norm_mean, norm_scale)
        net.train()
        return float(loss.detach())

    result = TrainResult(net=net, norm_mean=norm_mean, norm_scale=norm_scale)
    result.holdout_before = holdout_loss()

    opt = torch.optim.Adam(net.parameters(), lr=lr)
    steps = max(1, samples_per_epoch // batch_size)
    for epoch in range(epochs):
        running = 0.0
        for step in range(steps):
            rng = derive_rng(seed, _DATA_TAG, epoch, step)
            batch = generate_batch(sc, batch_size, D, rng)
            users = subsets_for(rng, batch_size)
            loss = _stage_batch_loss(net, sc, batch, users, norm_mean, norm_scale)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"training diverged at epoch {epoch} step {step}: loss={loss}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            running += float(loss.detach())
        result.epoch_losses.append(running / steps)

    result.holdout_after = holdout_loss()
    return result


def train_scheduling_gnn(sc: TrainScenario, epochs: int = 50, lr: float = 1e-3,
                         samples_per_epoch: int = 10_000, batch_size: int = 500,
                         hidden: int = 64, Z: int = 2, seed: int = 0) -> TrainResult:
    """Scheduling network: K+1 nodes over the D_beta pilot prefix."""
    return _run_training(sc, "scheduling", epochs, lr, samples_per_epoch,
                         batch_size, hidden, Z, seed, schedules=None)


def train_ris_gnn(sc: TrainScenario, schedules="random", epochs: int = 50,
                  lr: float = 1e-3, samples_per_epoch: int = 10_000,
                  batch_size: int = 500, hidden: int = 64, Z: int = 2,
                  seed: int = 0) -> TrainResult:
    """RIS network: scheduled users only (M+1 nodes) over D_theta sub-frames.

    ``schedules`` is "random" (uniform M-subsets) or a callable
    (rng, B, K, M) -> (B, U) index array.
    """
    return _run_training(sc, "ris", epochs, lr, samples_per_epoch, batch_size,
                         hidden, Z, seed, schedules=schedules)
