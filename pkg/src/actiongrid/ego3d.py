"""Egocentric 3D position features from depth maps.

Pipeline: back-project depth through pinhole intrinsics, encode each point
with sinusoidal features (sin/cos at geometric frequencies 2^k * pi), average
the features of valid pixels per patch, feed the patch vectors through a
Linear -> LayerNorm -> ReLU -> Linear head, and add the result onto the
visual patch features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .artifact import ArtifactError, read_header_binary, write_header_binary

DEFAULT_PATCH = 14
DEFAULT_FREQ_COUNT = 34
DEFAULT_HIDDEN = 1152
LAYERNORM_EPS = 1e-6

DEPTH_MAGIC = "EGO3D-DEPTH"
POINTS_MAGIC = "EGO3D-POINTS"
FEATURES_MAGIC = "EGO3D-FEATURES"
MLP_MAGIC = "EGO3D-MLP"
INTRINSICS_MAGIC = "EGO3D-INTRINSICS"


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters; focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")


@dataclass(frozen=True, eq=False)
class PointMap:
    """Per-pixel camera-frame positions; invalid pixels are flagged and zeroed."""

    points: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True, eq=False)
class PatchEncoding:
    """Per-patch mean of the valid pixels' sinusoidal features."""

    features: np.ndarray
    valid: np.ndarray
    patch_size: int
    freq_count: int


@dataclass(frozen=True, eq=False)
class MlpWeights:
    """Linear(in -> hidden) + LayerNorm + ReLU + Linear(hidden -> out)."""

    w1: np.ndarray
    b1: np.ndarray
    ln_scale: np.ndarray
    ln_shift: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        hidden = self.w1.shape[1]
        checks = (
            self.b1.shape == (hidden,),
            self.ln_scale.shape == (hidden,),
            self.ln_shift.shape == (hidden,),
            self.w2.shape[0] == hidden,
            self.b2.shape == (self.w2.shape[1],),
        )
        if not all(checks):
            raise ValueError("inconsistent MLP weight shapes")
        for name in ("w1", "b1", "ln_scale", "ln_shift", "w2", "b2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite entries in {name}")

    @classmethod
    def zeros(cls, d_in: int = 6 * DEFAULT_FREQ_COUNT,
              hidden: int = DEFAULT_HIDDEN, d_out: int = DEFAULT_HIDDEN):
        return cls(w1=np.zeros((d_in, hidden)), b1=np.zeros(hidden),
                   ln_scale=np.zeros(hidden), ln_shift=np.zeros(hidden),
                   w2=np.zeros((hidden, d_out)), b2=np.zeros(d_out))


def back_project(depth: np.ndarray, intrinsics: CameraIntrinsics) -> PointMap:
    """Pinhole back-projection of a metric depth map.

    x = (u - cx) * d / fx, y = (v - cy) * d / fy, z = d. Pixels with
    non-positive or non-finite depth are flagged invalid and zeroed.
    """
    depth = np.asarray(depth, dtype=np.float64)
    expected = (intrinsics.height, intrinsics.width)
    if depth.shape != expected:
        raise ValueError(f"depth map is {depth.shape}, intrinsics expect {expected}")
    valid = np.isfinite(depth) & (depth > 0.0)
    d = np.where(valid, depth, 0.0)
    u = np.arange(intrinsics.width, dtype=np.float64)
    v = np.arange(intrinsics.height, dtype=np.float64)
    x = (u[None, :] - intrinsics.cx) / intrinsics.fx * d
    y = (v[:, None] - intrinsics.cy) / intrinsics.fy * d
    points = np.stack([x, y, d], axis=-1)
    return PointMap(points=points, valid=valid)


def sinusoidal_encode(points: PointMap,
                      freq_count: int = DEFAULT_FREQ_COUNT) -> np.ndarray:
    """Per-pixel features: sin/cos of 2^k * pi * coordinate, k = 0..L-1.

    Feature layout is coordinate-major: index ((c * L) + k) * 2 is the sin
    slot and + 1 the cos slot for coordinate c. Invalid pixels are all-zero.
    Output width is 6 * L (204 for the default L = 34).
    """
    if freq_count < 1:
        raise ValueError(f"freq_count must be >= 1, got {freq_count}")
    coords = points.points
    scales = (2.0 ** np.arange(freq_count)) * np.pi
    angles = coords[..., :, None] * scales
    feats = np.empty(angles.shape + (2,), dtype=np.float64)
    feats[..., 0] = np.sin(angles)
    feats[..., 1] = np.cos(angles)
    feats = feats.reshape(coords.shape[:-1] + (6 * freq_count,))
    feats[~points.valid] = 0.0
    return feats


def patch_average(features: np.ndarray, patch_size: int = DEFAULT_PATCH,
                  valid: np.ndarray | None = None) -> PatchEncoding:
    """Mean feature of each patch's valid pixels.

    Height and width must be divisible by the patch size. A patch without
    valid pixels yields the zero vector and a cleared mask bit. Invalid
    pixels must already carry zero features (sinusoidal_encode guarantees
    this), so they contribute nothing to the mean.
    """
    features = np.asarray(features, dtype=np.float64)
    h, w, dim = features.shape
    if patch_size < 1 or h % patch_size or w % patch_size:
        raise ValueError(f"image size {h}x{w} is not divisible by patch size "
                         f"{patch_size}")
    if valid is None:
        valid = np.ones((h, w), dtype=bool)
    ph, pw = h // patch_size, w // patch_size
    blocks = features.reshape(ph, patch_size, pw, patch_size, dim)
    sums = blocks.sum(axis=(1, 3))
    counts = valid.reshape(ph, patch_size, pw, patch_size).sum(axis=(1, 3))
    patch_valid = counts > 0
    out = np.zeros((ph, pw, dim), dtype=np.float64)
    np.divide(sums, counts[..., None], out=out, where=patch_valid[..., None])
    return PatchEncoding(features=out, valid=patch_valid,
                         patch_size=patch_size, freq_count=dim // 6)


def mlp_forward(encoding, weights: MlpWeights) -> np.ndarray:
    """Linear -> LayerNorm(eps 1e-6) -> ReLU -> Linear, applied per patch."""
    feats = encoding.features if isinstance(encoding, PatchEncoding) else encoding
    feats = np.asarray(feats, dtype=np.float64)
    if feats.shape[-1] != weights.w1.shape[0]:
        raise ValueError(f"feature width {feats.shape[-1]} does not match "
                         f"weight input {weights.w1.shape[0]}")
    pre = feats @ weights.w1 + weights.b1
    mean = pre.mean(axis=-1, keepdims=True)
    var = pre.var(axis=-1, keepdims=True)
    normed = (pre - mean) / np.sqrt(var + LAYERNORM_EPS)
    normed = normed * weights.ln_scale + weights.ln_shift
    hidden = np.maximum(normed, 0.0)
    return hidden @ weights.w2 + weights.b2


def fuse_features(visual: np.ndarray, position: np.ndarray) -> np.ndarray:
    """Elementwise sum of visual patch features and position embeddings."""
    visual = np.asarray(visual)
    position = np.asarray(position)
    if visual.shape != position.shape:
        raise ValueError(f"shape mismatch: visual {visual.shape} vs position "
                         f"{position.shape}")
    return visual + position


# ---------------------------------------------------------------------------
# file formats

def write_depth(path, depth: np.ndarray) -> None:
    """'EGO3D-DEPTH v1 <width> <height>' header + little-endian float32 rows."""
    depth = np.asarray(depth)
    if depth.ndim != 2:
        raise ValueError("depth map must be 2-D")
    h, w = depth.shape
    header = f"{DEPTH_MAGIC} v1 {w} {h}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(depth, dtype="<f4").tobytes())


def read_depth(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    cut = blob.find(b"\n")
    if cut < 0:
        raise ArtifactError(f"missing header line in {path}")
    head = blob[:cut].decode("ascii").split()
    if len(head) != 4 or head[0] != DEPTH_MAGIC or head[1] != "v1":
        raise ArtifactError(f"not a depth map file: {blob[:cut]!r}")
    w, h = int(head[2]), int(head[3])
    payload = blob[cut + 1:]
    if len(payload) != w * h * 4:
        raise ArtifactError(f"depth payload is {len(payload)} bytes, "
                            f"expected {w * h * 4}")
    return np.frombuffer(payload, dtype="<f4").reshape(h, w).astype(np.float64)


def write_intrinsics(path, intrinsics: CameraIntrinsics) -> None:
    lines = [f"{INTRINSICS_MAGIC} v1"]
    for name in ("fx", "fy", "cx", "cy"):
        lines.append(f"{name} {format(getattr(intrinsics, name), '.17g')}")
    lines.append(f"width {intrinsics.width}")
    lines.append(f"height {intrinsics.height}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_intrinsics(path) -> CameraIntrinsics:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or lines[0] != f"{INTRINSICS_MAGIC} v1":
        raise ArtifactError(f"not an intrinsics file: {path}")
    fields = {}
    for line in lines[1:]:
        key, _, rest = line.partition(" ")
        fields[key] = rest
    try:
        return CameraIntrinsics(fx=float(fields["fx"]), fy=float(fields["fy"]),
                                cx=float(fields["cx"]), cy=float(fields["cy"]),
                                width=int(fields["width"]),
                                height=int(fields["height"]))
    except (KeyError, ValueError) as exc:
        raise ArtifactError(f"bad intrinsics file {path}: {exc}") from None


def write_points(path, pointmap: PointMap) -> None:
    """Interleaved xyz float32 payload followed by a validity byte per pixel."""
    h, w, _ = pointmap.points.shape
    fields = [("width", w), ("height", h)]
    payload = (np.ascontiguousarray(pointmap.points, dtype="<f4").tobytes()
               + np.ascontiguousarray(pointmap.valid, dtype=np.uint8).tobytes())
    write_header_binary(path, POINTS_MAGIC, fields, payload)


def read_points(path) -> PointMap:
    fields, payload = read_header_binary(path, POINTS_MAGIC)
    w, h = int(fields["width"]), int(fields["height"])
    xyz_bytes = h * w * 3 * 4
    if len(payload) != xyz_bytes + h * w:
        raise ArtifactError(f"point map payload is {len(payload)} bytes, "
                            f"expected {xyz_bytes + h * w}")
    points = np.frombuffer(payload[:xyz_bytes], dtype="<f4")
    valid = np.frombuffer(payload[xyz_bytes:], dtype=np.uint8)
    return PointMap(points=points.reshape(h, w, 3).astype(np.float64),
                    valid=valid.reshape(h, w).astype(bool))


def write_features(path, features: np.ndarray) -> None:
    """(rows, cols, dim) float32 grid, e.g. patch features or embeddings."""
    features = np.asarray(features)
    if features.ndim != 3:
        raise ValueError("feature grid must be 3-D (rows, cols, dim)")
    rows, cols, dim = features.shape
    fields = [("rows", rows), ("cols", cols), ("dim", dim)]
    payload = np.ascontiguousarray(features, dtype="<f4").tobytes()
    write_header_binary(path, FEATURES_MAGIC, fields, payload)


def read_features(path) -> np.ndarray:
    fields, payload = read_header_binary(path, FEATURES_MAGIC)
    rows, cols, dim = (int(fields[k]) for k in ("rows", "cols", "dim"))
    expected = rows * cols * dim * 4
    if len(payload) != expected:
        raise ArtifactError(f"feature payload is {len(payload)} bytes, "
                            f"expected {expected}")
    return (np.frombuffer(payload, dtype="<f4")
            .reshape(rows, cols, dim).astype(np.float64))


def write_mlp_weights(path, weights: MlpWeights) -> None:
    d_in, hidden = weights.w1.shape
    d_out = weights.w2.shape[1]
    fields = [("input", d_in), ("hidden", hidden), ("out", d_out),
              ("byte-order", "little-endian"), ("dtype", "float32")]
    parts = [weights.w1, weights.b1, weights.ln_scale, weights.ln_shift,
             weights.w2, weights.b2]
    payload = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes()
                       for p in parts)
    write_header_binary(path, MLP_MAGIC, fields, payload)


def read_mlp_weights(path) -> MlpWeights:
    fields, payload = read_header_binary(path, MLP_MAGIC)
    d_in, hidden, d_out = (int(fields[k]) for k in ("input", "hidden", "out"))
    shapes = [(d_in, hidden), (hidden,), (hidden,), (hidden,),
              (hidden, d_out), (d_out,)]
    expected = sum(int(np.prod(s)) for s in shapes) * 4
    if len(payload) != expected:
        raise ArtifactError(f"MLP payload is {len(payload)} bytes, "
                            f"expected {expected}")
    arrays = []
    offset = 0
    for shape in shapes:
        count = int(np.prod(shape))
        chunk = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        arrays.append(chunk.reshape(shape).astype(np.float64))
        offset += count * 4
    return MlpWeights(*arrays)
