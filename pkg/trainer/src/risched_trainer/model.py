"""Torch implementation of the RIS/user graph network.

Mirrors the inference contract exactly: shared two-layer ReLU MLPs g_w,
g_theta, f1..f5 (ReLU after both layers), linear heads of width 2N and 2M,
Z message rounds with an element-wise mean into the RIS node and an
element-wise max over the *other* users into each user node (zeros when a
user has no neighbours).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn


@dataclass
class Arch:
    M: int
    N: int
    D: int
    Z: int = 2
    g_hidden: int = 64
    repr_dim: int = 64

    @property
    def feature_dim(self) -> int:
        return 1 + 2 * self.M * self.D


def _mlp(din: int, hidden: int, dout: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(din, hidden), nn.ReLU(),
                         nn.Linear(hidden, dout), nn.ReLU())


class GraphNet(nn.Module):
    def __init__(self, arch: Arch):
        super().__init__()
        self.arch = arch
        F, H, R = arch.feature_dim, arch.g_hidden, arch.repr_dim
        self.g_w = _mlp(F, H, R)
        self.g_theta = _mlp(R, H, R)
        self.f1 = _mlp(2 * R, R, R)
        self.f2 = _mlp(R, R, R)
        self.f3 = _mlp(R, R, R)
        self.f4 = _mlp(3 * R, R, R)
        self.f5 = _mlp(R, R, R)
        self.l2n = nn.Linear(R, 2 * arch.N)
        self.l2m = nn.Linear(R, 2 * arch.M)

    def forward(self, feats: torch.Tensor):
        """feats (B, U, F) -> RIS head (B, 2N), user heads (B, U, 2M)."""
        B, U, _ = feats.shape
        vk = self.g_w(feats)
        v0 = self.g_theta(vk.mean(dim=1))
        for _ in range(self.arch.Z):
            f2v0 = self.f2(v0)
            f3vk = self.f3(vk)
            v0_new = self.f1(torch.cat([f2v0, f3vk.mean(dim=1)], dim=-1))
            f5vk = self.f5(vk)
            if U > 1:
                expanded = f5vk[:, None, :, :].expand(B, U, U, f5vk.shape[-1])
                mask = torch.eye(U, dtype=torch.bool, device=feats.device)
                masked = expanded.masked_fill(mask[None, :, :, None], -torch.inf)
                others = masked.max(dim=2).values
            else:
                others = torch.zeros_like(f5vk)
            vk_new = self.f4(torch.cat(
                [vk, f2v0[:, None, :].expand(B, U, -1), others], dim=-1))
            v0, vk = v0_new, vk_new
        return self.l2n(v0), self.l2m(vk)


def state_tensors(net: GraphNet) -> dict:
    """Float32 (in, out)-layout tensors keyed by the portable names."""
    out = {}
    for name, mod in (("g_w", net.g_w), ("g_theta", net.g_theta), ("f1", net.f1),
                      ("f2", net.f2), ("f3", net.f3), ("f4", net.f4),
                      ("f5", net.f5)):
        lin0, lin1 = mod[0], mod[2]
        out[f"{name}.w0"] = lin0.weight.detach().t().contiguous().numpy()
        out[f"{name}.b0"] = lin0.bias.detach().numpy()
        out[f"{name}.w1"] = lin1.weight.detach().t().contiguous().numpy()
        out[f"{name}.b1"] = lin1.bias.detach().numpy()
    out["l2n.w"] = net.l2n.weight.detach().t().contiguous().numpy()
    out["l2n.b"] = net.l2n.bias.detach().numpy()
    out["l2m.w"] = net.l2m.weight.detach().t().contiguous().numpy()
    out["l2m.b"] = net.l2m.bias.detach().numpy()
    return {k: np.ascontiguousarray(v, dtype=np.float32) for k, v in out.items()}


def load_state_tensors(net: GraphNet, tensors: dict) -> None:
    with torch.no_grad():
        for name, mod in (("g_w", net.g_w), ("g_theta", net.g_theta), ("f1", net.f1),
                          ("f2", net.f2), ("f3", net.f3), ("f4", net.f4),
                          ("f5", net.f5)):
            mod[0].weight.copy_(torch.from_numpy(tensors[f"{name}.w0"].T.copy()))
            mod[0].bias.copy_(torch.from_numpy(tensors[f"{name}.b0"].copy()))
            mod[2].weight.copy_(torch.from_numpy(tensors[f"{name}.w1"].T.copy()))
            mod[2].bias.copy_(torch.from_numpy(tensors[f"{name}.b1"].copy()))
        net.l2n.weight.copy_(torch.from_numpy(tensors["l2n.w"].T.copy()))
        net.l2n.bias.copy_(torch.from_numpy(tensors["l2n.b"].copy()))
        net.l2m.weight.copy_(torch.from_numpy(tensors["l2m.w"].T.copy()))
        net.l2m.bias.copy_(torch.from_numpy(tensors["l2m.b"].copy()))


def reference_forward(net: GraphNet, features: np.ndarray):
    """Golden forward pass on standardized features (U, F) -> numpy heads."""
    net.eval()
    with torch.no_grad():
        out0, outk = net(torch.from_numpy(
            np.asarray(features, dtype=np.float32))[None])
    return out0[0].numpy().copy(), outk[0].numpy().copy()
