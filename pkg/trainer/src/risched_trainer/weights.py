"""Writer/reader of the portable weight file (the cross-package contract).

Layout: 8-byte little-endian u64 manifest length, UTF-8 JSON manifest
{version, arch{M,N,D,Z,widths}, norm{mean,scale}, tensors:[{name, shape,
byte_offset}]}, then a blob of little-endian float32 values, row-major,
offsets relative to the blob start.  The writer is canonical (sorted
tensor names, contiguous offsets, compact sorted-key JSON) so identical
models produce identical bytes.
"""

from __future__ import annotations

import json

import numpy as np

from .model import Arch, GraphNet, load_state_tensors, state_tensors

FORMAT_VERSION = 1


def expected_shapes(arch: Arch) -> dict:
    F, H, R = arch.feature_dim, arch.g_hidden, arch.repr_dim
    shapes = {}
    for name, din in (("g_w", F), ("g_theta", R), ("f1", 2 * R), ("f2", R),
                      ("f3", R), ("f4", 3 * R), ("f5", R)):
        hid = H if name in ("g_w", "g_theta") else R
        shapes[f"{name}.w0"] = (din, hid)
        shapes[f"{name}.b0"] = (hid,)
        shapes[f"{name}.w1"] = (hid, R)
        shapes[f"{name}.b1"] = (R,)
    shapes["l2n.w"] = (R, 2 * arch.N)
    shapes["l2n.b"] = (2 * arch.N,)
    shapes["l2m.w"] = (R, 2 * arch.M)
    shapes["l2m.b"] = (2 * arch.M,)
    return shapes


def export_weights(net: GraphNet, norm_mean: np.ndarray, norm_scale: np.ndarray,
                   path) -> None:
    arch = net.arch
    tensors = state_tensors(net)
    shapes = expected_shapes(arch)
    if set(tensors) != set(shapes):
        raise ValueError("model tensors do not match the architecture")
    entries = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        t = tensors[name]
        if t.shape != shapes[name]:
            raise ValueError(f"tensor {name} has shape {t.shape}, want {shapes[name]}")
        raw = t.astype("<f4").tobytes(order="C")
        entries.append({"name": name, "shape": list(t.shape), "byte_offset": offset})
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "version": FORMAT_VERSION,
        "arch": {"M": arch.M, "N": arch.N, "D": arch.D, "Z": arch.Z,
                 "widths": {"g_hidden": arch.g_hidden, "repr": arch.repr_dim}},
        "norm": {"mean": [float(x) for x in np.asarray(norm_mean, dtype=np.float32)],
                 "scale": [float(x) for x in np.asarray(norm_scale, dtype=np.float32)]},
        "tensors": entries,
    }
    payload = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(len(payload).to_bytes(8, "little"))
        fh.write(payload)
        for raw in blobs:
            fh.write(raw)


def import_weights(path):
    """Strictly validated load; returns (GraphNet, norm_mean, norm_scale)."""
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise ValueError("truncated weight file")
        length = int.from_bytes(header, "little")
        payload = fh.read(length)
        if len(payload) != length:
            raise ValueError("truncated manifest")
        manifest = json.loads(payload.decode("utf-8"))
        blob = fh.read()

    if manifest.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported version {manifest.get('version')}")
    a = manifest["arch"]
    arch = Arch(M=a["M"], N=a["N"], D=a["D"], Z=a["Z"],
                g_hidden=a["widths"]["g_hidden"], repr_dim=a["widths"]["repr"])
    shapes = expected_shapes(arch)

    tensors = {}
    spans = []
    for entry in manifest["tensors"]:
        name, shape, off = entry["name"], tuple(entry["shape"]), entry["byte_offset"]
        if name not in shapes or shape != shapes[name]:
            raise ValueError(f"unexpected tensor {name} {shape}")
        nbytes = int(np.prod(shape)) * 4
        if off % 4 or off < 0 or off + nbytes > len(blob):
            raise ValueError(f"tensor {name} offset {off} out of bounds")
        spans.append((off, off + nbytes, name))
        tensors[name] = np.frombuffer(blob, dtype="<f4", count=int(np.prod(shape)),
                                      offset=off).reshape(shape).copy()
    if set(tensors) != set(shapes):
        raise ValueError("manifest is missing tensors")
    spans.sort()
    cursor = 0
    for start, end, name in spans:
        if start != cursor:
            raise ValueError(f"tensor {name} leaves a gap or overlap")
        cursor = end
    if cursor != len(blob):
        raise ValueError("blob size mismatch")

    net = GraphNet(arch)
    load_state_tensors(net, tensors)
    norm = manifest["norm"]
    return (net, np.asarray(norm["mean"], dtype=np.float32),
            np.asarray(norm["scale"], dtype=np.float32))
