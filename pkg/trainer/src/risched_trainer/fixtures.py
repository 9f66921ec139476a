"""Golden fixture emission for cross-package parity checks.

A fixture bundle is one seeded sample: the pilot block (in the simulator's
CSV dump schema), the user weights, the standardized features, the
reference forward outputs, and the exported weight file.  The consuming
side loads the weight file, rebuilds features from the pilot CSV, runs its
own forward pass and compares against these files.
"""

from __future__ import annotations

import csv
import os

import numpy as np

from .model import GraphNet, reference_forward
from .scenario import TrainScenario
from .simgrad import build_raw_features, derive_rng, generate_batch, standardize
from .weights import export_weights

_FMT = "{:.17g}"


def write_pilot_csv(Y: np.ndarray, phases: np.ndarray, scale: float, path) -> None:
    """One complex entry per row; schema shared with the simulator dumps."""
    K, M, D = Y.shape
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "a", "b", "c", "re", "im"])
        w.writerow(["scale", 0, 0, 0, _FMT.format(scale), "0"])
        for k in range(K):
            for m in range(M):
                for d in range(D):
                    v = Y[k, m, d]
                    w.writerow(["y", k, m, d, _FMT.format(v.real), _FMT.format(v.imag)])
        for d in range(D):
            for n in range(phases.shape[1]):
                v = phases[d, n]
                w.writerow(["theta", d, n, 0, _FMT.format(v.real), _FMT.format(v.imag)])


def write_fixture_bundle(out_dir, net: GraphNet, norm_mean, norm_scale,
                         sc: TrainScenario, seed: int = 0) -> dict:
    """Emit one sample's fixture files plus the weight file; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    arch = net.arch
    rng = derive_rng(seed, 0xF1D0)
    batch = generate_batch(sc, 1, arch.D, rng)
    users = min(batch.h_d.shape[1], max(arch.M, 2))
    alpha = batch.alpha[0, :users]
    Y = batch.Y[0, :users]

    raw = build_raw_features(alpha[None], Y[None])
    feats = standardize(raw, norm_mean, norm_scale)[0]
    v0, vk = reference_forward(net, feats)

    paths = {name: os.path.join(out_dir, fname) for name, fname in (
        ("model", "model.bin"), ("pilots", "fixture_pilots.csv"),
        ("alpha", "fixture_alpha.csv"), ("features", "fixture_features.csv"),
        ("outputs", "fixture_outputs.csv"))}

    export_weights(net, norm_mean, norm_scale, paths["model"])
    scale = batch.h_d.shape[1] * sc.P_u      # K * P_u decorrelation normalization
    write_pilot_csv(Y, batch.phases[0], scale, paths["pilots"])

    with open(paths["alpha"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("user,alpha\n")
        for k, a in enumerate(alpha):
            fh.write(f"{k},{_FMT.format(a)}\n")
    np.savetxt(paths["features"], feats, delimiter=",", fmt="%.9e")
    with open(paths["outputs"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(_FMT.format(x) for x in v0) + "\n")
        for row in vk:
            fh.write(",".join(_FMT.format(x) for x in row) + "\n")
    return paths


def read_outputs_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        rows = [np.array([float(t) for t in line.strip().split(",")])
                for line in fh if line.strip()]
    return rows[0], np.vstack(rows[1:])
