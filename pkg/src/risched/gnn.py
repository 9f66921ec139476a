"""Graph-network inference over one RIS node plus a variable user-node set.

Per-node functions are shared across user nodes, so the same weights run
for any number of users: permuting the users permutes the per-user outputs
and leaves the RIS output unchanged.

Forward pass (Z message rounds, all in float32):

    e_k  = g_w(pi_k)                         per-user embedding
    v_0  = g_theta(mean_k e_k)               RIS node init
    v_0' = f1([f2(v_0); mean_k f3(v_k)])
    v_k' = f4([v_k; f2(v_0); max_{j != k} f5(v_j)])
    out  = l2n(v_0), l2m(v_k)                linear heads, widths 2N / 2M

g_w, g_theta and f1..f5 are two-layer MLPs with ReLU after both layers;
the heads are plain linear maps.  The max over an empty neighbour set
(single user) is the zero vector.

Weight file format (shared, bit-exact, little-endian):
bytes 0..7 hold a u64 length L, followed by L bytes of UTF-8 JSON manifest
{version, arch{M,N,D,Z,widths}, norm{mean,scale}, tensors:[{name, shape,
byte_offset}]}, followed by a blob of float32 values, row-major, at the
stated offsets relative to the start of the blob.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .channel import BeamMatrix, RisConfig
from .pilots import PilotBlock

FORMAT_VERSION = 1
_THETA_EPS = 1e-12


@dataclass
class GnnArch:
    M: int
    N: int
    D: int
    Z: int = 2
    g_hidden: int = 512     # hidden width of the g_w / g_theta encoders
    repr_dim: int = 512     # representation width carried between rounds

    def __post_init__(self):
        if min(self.M, self.N, self.D, self.Z, self.g_hidden, self.repr_dim) < 1:
            raise ValueError("all architecture sizes must be >= 1")

    @property
    def feature_dim(self) -> int:
        # [alpha_k; vec(Re Y_k); vec(Im Y_k)] with Y_k of shape M x D.
        return 1 + 2 * self.M * self.D

    def tensor_shapes(self) -> dict:
        F, H, R = self.feature_dim, self.g_hidden, self.repr_dim
        shapes = {}
        for name, din in (("g_w", F), ("g_theta", R), ("f1", 2 * R), ("f2", R),
                          ("f3", R), ("f4", 3 * R), ("f5", R)):
            shapes[f"{name}.w0"] = (din, H if name in ("g_w", "g_theta") else R)
            shapes[f"{name}.b0"] = (H if name in ("g_w", "g_theta") else R,)
            shapes[f"{name}.w1"] = ((H if name in ("g_w", "g_theta") else R), R)
            shapes[f"{name}.b1"] = (R,)
        shapes["l2n.w"] = (R, 2 * self.N)
        shapes["l2n.b"] = (2 * self.N,)
        shapes["l2m.w"] = (R, 2 * self.M)
        shapes["l2m.b"] = (2 * self.M,)
        return shapes


@dataclass
class GnnModel:
    arch: GnnArch
    tensors: dict = field(repr=False)
    norm_mean: np.ndarray = field(repr=False, default=None)
    norm_scale: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        expected = self.arch.tensor_shapes()
        if set(self.tensors) != set(expected):
            missing = set(expected) ^ set(self.tensors)
            raise ValueError(f"tensor set mismatch: {sorted(missing)}")
        for name, shape in expected.items():
            t = np.ascontiguousarray(self.tensors[name], dtype=np.float32)
            if t.shape != shape:
                raise ValueError(f"tensor {name} has shape {t.shape}, expected {shape}")
            self.tensors[name] = t
        F = self.arch.feature_dim
        if self.norm_mean is None:
            self.norm_mean = np.zeros(F, dtype=np.float32)
        if self.norm_scale is None:
            self.norm_scale = np.ones(F, dtype=np.float32)
        self.norm_mean = np.asarray(self.norm_mean, dtype=np.float32)
        self.norm_scale = np.asarray(self.norm_scale, dtype=np.float32)
        if self.norm_mean.shape != (F,) or self.norm_scale.shape != (F,):
            raise ValueError("normalization constants must have the feature length")
        if np.any(self.norm_scale <= 0):
            raise ValueError("normalization scales must be positive")


def random_init_model(arch: GnnArch, rng: np.random.Generator) -> GnnModel:
    """Glorot-uniform weights, zero biases; identity feature normalization."""
    tensors = {}
    for name, shape in arch.tensor_shapes().items():
        if len(shape) == 1:
            tensors[name] = np.zeros(shape, dtype=np.float32)
        else:
            limit = np.sqrt(6.0 / sum(shape))
            tensors[name] = rng.uniform(-limit, limit, size=shape).astype(np.float32)
    return GnnModel(arch=arch, tensors=tensors)


def build_features(alpha: np.ndarray, block: PilotBlock, model: GnnModel) -> np.ndarray:
    """Standardized node features, one row per user: [alpha; Re Y; Im Y].

    Y_k (M x D) is vectorized column-major, i.e. sub-frame by sub-frame.
    """
    if block.D != model.arch.D:
        raise ValueError(f"pilot depth {block.D} does not match model depth {model.arch.D}")
    U, M, _ = block.Y.shape
    if M != model.arch.M:
        raise ValueError("antenna count mismatch between pilots and model")
    if len(alpha) != U:
        raise ValueError("one weight per user required")
    flat = np.stack([block.Y[k].flatten(order="F") for k in range(U)])
    raw = np.concatenate([np.asarray(alpha, dtype=float)[:, None],
                          flat.real, flat.imag], axis=1)
    return ((raw - model.norm_mean) / model.norm_scale).astype(np.float32)


def _mlp2(model: GnnModel, name: str, x: np.ndarray) -> np.ndarray:
    t = model.tensors
    h = np.maximum(x @ t[f"{name}.w0"] + t[f"{name}.b0"], 0.0)
    return np.maximum(h @ t[f"{name}.w1"] + t[f"{name}.b1"], 0.0)


def gnn_forward(model: GnnModel, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run the network on standardized features (U, F) for any user count U.

    Returns the RIS head output (2N,) and the per-user head outputs (U, 2M).
    """
    feats = np.asarray(features, dtype=np.float32)
    if feats.ndim != 2 or feats.shape[1] != model.arch.feature_dim:
        raise ValueError("features must be (users, feature_dim)")
    U = feats.shape[0]
    if U < 1:
        raise ValueError("need at least one user")

    vk = _mlp2(model, "g_w", feats)                       # (U, R)
    v0 = _mlp2(model, "g_theta", vk.mean(axis=0))         # (R,)

    for _ in range(model.arch.Z):
        f2v0 = _mlp2(model, "f2", v0)
        f3vk = _mlp2(model, "f3", vk)
        v0_new = _mlp2(model, "f1", np.concatenate([f2v0, f3vk.mean(axis=0)]))
        f5vk = _mlp2(model, "f5", vk)
        vk_new = np.empty_like(vk)
        for k in range(U):
            if U > 1:
                others = np.max(np.delete(f5vk, k, axis=0), axis=0)
            else:
                others = np.zeros_like(f5vk[0])
            vk_new[k] = _mlp2(model, "f4",
                              np.concatenate([vk[k], f2v0, others]))
        v0, vk = v0_new, vk_new

    t = model.tensors
    out0 = v0 @ t["l2n.w"] + t["l2n.b"]
    outk = vk @ t["l2m.w"] + t["l2m.b"]
    return out0, outk


def decode_outputs(v0: np.ndarray, vk: np.ndarray, p_d: float,
                   ) -> tuple[RisConfig, BeamMatrix]:
    """Map head outputs to a unit-modulus RIS vector and a full-power beam matrix."""
    v0 = np.asarray(v0, dtype=np.float64)
    vk = np.asarray(vk, dtype=np.float64)
    if v0.ndim != 1 or v0.shape[0] % 2:
        raise ValueError("RIS head output must have even length 2N")
    N = v0.shape[0] // 2
    M = vk.shape[1] // 2
    c = v0[:N] + 1j * v0[N:]
    zero = np.abs(c) == 0.0
    if np.any(zero):
        c = c + zero * _THETA_EPS
    theta = c / np.abs(c)

    Wt = (vk[:, :M] + 1j * vk[:, M:]).T                  # (M, U)
    total = np.sum(np.abs(Wt) ** 2)
    if total == 0.0:
        raise ValueError("all-zero beam output cannot be power-normalized")
    W = Wt * np.sqrt(p_d / total)
    return RisConfig(theta=theta), BeamMatrix(W=W)


def _canonical_tensor_order(arch: GnnArch) -> list:
    return sorted(arch.tensor_shapes())


def save_model(model: GnnModel, path) -> None:
    """Write the portable weight file (see the module docstring for the layout)."""
    order = _canonical_tensor_order(model.arch)
    entries = []
    offset = 0
    blobs = []
    for name in order:
        t = model.tensors[name]
        raw = t.astype("<f4").tobytes(order="C")
        entries.append({"name": name, "shape": list(t.shape), "byte_offset": offset})
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "version": FORMAT_VERSION,
        "arch": {"M": model.arch.M, "N": model.arch.N, "D": model.arch.D,
                 "Z": model.arch.Z,
                 "widths": {"g_hidden": model.arch.g_hidden,
                            "repr": model.arch.repr_dim}},
        "norm": {"mean": [float(x) for x in model.norm_mean],
                 "scale": [float(x) for x in model.norm_scale]},
        "tensors": entries,
    }
    payload = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(len(payload).to_bytes(8, "little"))
        fh.write(payload)
        for raw in blobs:
            fh.write(raw)


def load_model(path) -> GnnModel:
    """Read and strictly validate a portable weight file."""
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
        raise ValueError(f"unsupported weight file version {manifest.get('version')}")
    a = manifest["arch"]
    arch = GnnArch(M=a["M"], N=a["N"], D=a["D"], Z=a["Z"],
                   g_hidden=a["widths"]["g_hidden"], repr_dim=a["widths"]["repr"])
    expected = arch.tensor_shapes()

    spans = []
    tensors = {}
    for entry in manifest["tensors"]:
        name, shape, off = entry["name"], tuple(entry["shape"]), entry["byte_offset"]
        if name not in expected:
            raise ValueError(f"unexpected tensor '{name}'")
        if shape != expected[name]:
            raise ValueError(f"tensor {name} shape {shape} != expected {expected[name]}")
        nbytes = int(np.prod(shape)) * 4
        if off % 4 or off < 0 or off + nbytes > len(blob):
            raise ValueError(f"tensor {name} offset {off} out of bounds")
        spans.append((off, off + nbytes, name))
        tensors[name] = np.frombuffer(blob, dtype="<f4", count=int(np.prod(shape)),
                                      offset=off).reshape(shape).copy()
    if set(tensors) != set(expected):
        raise ValueError("manifest is missing tensors")
    spans.sort()
    cursor = 0
    for start, end, name in spans:
        if start != cursor:
            raise ValueError(f"tensor {name} leaves a gap or overlap in the blob")
        cursor = end
    if cursor != len(blob):
        raise ValueError("blob size does not match the manifest")

    norm = manifest["norm"]
    return GnnModel(arch=arch, tensors=tensors,
                    norm_mean=np.asarray(norm["mean"], dtype=np.float32),
                    norm_scale=np.asarray(norm["scale"], dtype=np.float32))
