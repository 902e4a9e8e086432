"""Episode ingestion, [-1, 1] normalization, polar conversion, Gaussian fitting.

The dataset format is line-delimited JSON, one action step per line:

    {"episode_id": "ep0", "step": 3, "action": [x, y, z, roll, pitch, yaw, grip]}

Translations are converted to polar coordinates after normalization, so the
radius lives in [0, sqrt(3)].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Sequence, Union

import numpy as np

#: raw action variables, in dataset order (grip is appended seventh)
VARIABLES = ("x", "y", "z", "roll", "pitch", "yaw")
#: fitted axes after the translation block is converted to polar
AXES = ("theta", "phi", "r", "roll", "pitch", "yaw")

#: below this radius the polar angles are conventionally 0
EPS_RADIUS = 1e-9
#: symmetric widening applied to degenerate (constant) quantile ranges
DEGENERATE_WIDEN = 1e-6
#: lower bound on fitted standard deviations
SIGMA_FLOOR = 1e-6

DEFAULT_Q_LOW = 0.01
DEFAULT_Q_HIGH = 0.99


class DatasetError(ValueError):
    """Malformed episode dataset; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(frozen=True)
class ActionSample:
    """One 7-DoF delta action step in raw units."""

    x: float
    y: float
    z: float
    roll: float
    pitch: float
    yaw: float
    grip: float
    episode_id: str = ""
    step: int = 0

    def __post_init__(self):
        for name in (*VARIABLES, "grip"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"action field '{name}' must be finite, got {value}")
        if not 0.0 <= self.grip <= 1.0:
            raise ValueError(f"grip must lie in [0, 1], got {self.grip}")
        if self.step < 0:
            raise ValueError(f"step must be non-negative, got {self.step}")

    def values(self) -> tuple:
        return (self.x, self.y, self.z, self.roll, self.pitch, self.yaw, self.grip)


@dataclass(frozen=True)
class PolarTranslation:
    """Translation delta in polar form: azimuth phi, inclination theta, radius r."""

    phi: float
    theta: float
    r: float

    def __post_init__(self):
        if self.r < 0.0:
            raise ValueError(f"radius must be non-negative, got {self.r}")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not -math.pi < self.phi <= math.pi:
            raise ValueError(f"phi must lie in (-pi, pi], got {self.phi}")


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-variable affine map onto [-1, 1], with quantile clipping bounds."""

    lo: tuple
    hi: tuple
    q_low: float = DEFAULT_Q_LOW
    q_high: float = DEFAULT_Q_HIGH

    def __post_init__(self):
        if len(self.lo) != len(VARIABLES) or len(self.hi) != len(VARIABLES):
            raise ValueError("lo/hi must hold one bound per action variable")
        if not 0.0 <= self.q_low < self.q_high <= 1.0:
            raise ValueError(f"quantiles must satisfy 0 <= q_low < q_high <= 1, "
                             f"got ({self.q_low}, {self.q_high})")
        for name, lo, hi in zip(VARIABLES, self.lo, self.hi):
            if not lo < hi:
                raise ValueError(f"degenerate range for '{name}': [{lo}, {hi}]")


@dataclass(frozen=True)
class GaussianParams:
    """Per-axis mean/std over the normalized polar and rotation axes."""

    mu: tuple
    sigma: tuple
    sample_count: int

    def __post_init__(self):
        if len(self.mu) != len(AXES) or len(self.sigma) != len(AXES):
            raise ValueError("mu/sigma must hold one entry per axis")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")
        for axis, sigma in zip(AXES, self.sigma):
            if not sigma > 0.0:
                raise ValueError(f"sigma for '{axis}' must be positive, got {sigma}")


def load_dataset(source: Union[str, "IO"]) -> list[ActionSample]:
    """Parse a line-delimited episode dataset from a path or binary stream.

    Empty lines are skipped; any malformed line raises DatasetError naming
    its 1-based line number.
    """
    if hasattr(source, "read"):
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    else:
        with open(source, "rb") as fh:
            text = fh.read().decode("utf-8")
    samples = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        samples.append(_parse_record(line, lineno))
    return samples


def _parse_record(line: str, lineno: int) -> ActionSample:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"invalid JSON ({exc.msg})", line=lineno) from None
    if not isinstance(record, dict):
        raise DatasetError("record must be a JSON object", line=lineno)
    for key in ("episode_id", "step", "action"):
        if key not in record:
            raise DatasetError(f"missing required field '{key}'", line=lineno)
    episode_id = record["episode_id"]
    step = record["step"]
    action = record["action"]
    if not isinstance(episode_id, str):
        raise DatasetError("field 'episode_id' must be a string", line=lineno)
    if isinstance(step, bool) or not isinstance(step, int):
        raise DatasetError("field 'step' must be an integer", line=lineno)
    if not isinstance(action, list) or len(action) != 7:
        raise DatasetError("field 'action' must be an array of 7 numbers", line=lineno)
    values = []
    for name, value in zip((*VARIABLES, "grip"), action):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise DatasetError(f"action field '{name}' must be a number", line=lineno)
        values.append(float(value))
    try:
        return ActionSample(*values, episode_id=episode_id, step=step)
    except ValueError as exc:
        raise DatasetError(str(exc), line=lineno) from None


def compute_normalizer(samples: Sequence[ActionSample],
                       q_low: float = DEFAULT_Q_LOW,
                       q_high: float = DEFAULT_Q_HIGH) -> NormalizationSpec:
    """Empirical quantile bounds per variable; constant axes widen by 1e-6."""
    if not samples:
        raise ValueError("empty dataset")
    if not 0.0 <= q_low < q_high <= 1.0:
        raise ValueError(f"quantiles must satisfy 0 <= q_low < q_high <= 1, "
                         f"got ({q_low}, {q_high})")
    raw = np.array([s.values()[:6] for s in samples], dtype=np.float64)
    lo = np.quantile(raw, q_low, axis=0).tolist()
    hi = np.quantile(raw, q_high, axis=0).tolist()
    for i in range(len(VARIABLES)):
        if not lo[i] < hi[i]:
            lo[i] -= DEGENERATE_WIDEN
            hi[i] += DEGENERATE_WIDEN
    return NormalizationSpec(lo=tuple(lo), hi=tuple(hi), q_low=q_low, q_high=q_high)


def normalize(sample: ActionSample, spec: NormalizationSpec) -> np.ndarray:
    """Normalized 7-vector: first six entries clipped to [-1, 1], grip as-is."""
    vec = np.array(sample.values(), dtype=np.float64)
    return normalize_batch(vec[None, :], spec)[0]


def normalize_batch(actions: np.ndarray, spec: NormalizationSpec) -> np.ndarray:
    """Vectorized normalize over an (N, 7) raw-action array."""
    arr = np.asarray(actions, dtype=np.float64)
    lo = np.asarray(spec.lo)
    hi = np.asarray(spec.hi)
    out = arr.copy()
    out[..., :6] = np.clip(2.0 * (arr[..., :6] - lo) / (hi - lo) - 1.0, -1.0, 1.0)
    return out


def denormalize(vec: np.ndarray, spec: NormalizationSpec) -> np.ndarray:
    """Inverse of normalize on [lo, hi]; grip passes through."""
    return denormalize_batch(np.asarray(vec, dtype=np.float64)[None, :], spec)[0]


def denormalize_batch(vecs: np.ndarray, spec: NormalizationSpec) -> np.ndarray:
    arr = np.asarray(vecs, dtype=np.float64)
    lo = np.asarray(spec.lo)
    hi = np.asarray(spec.hi)
    out = arr.copy()
    out[..., :6] = lo + (arr[..., :6] + 1.0) * (hi - lo) / 2.0
    return out


def cartesian_to_polar(x: float, y: float, z: float) -> PolarTranslation:
    """Polar form of a translation delta.

    theta = 0 at the +z pole and phi = 0 on the degenerate axis, so the
    conversion is deterministic and round-trip-safe for r = 0. atan2's -pi
    output folds to +pi to keep phi in (-pi, pi].

    theta is evaluated as atan2(hypot(x, y), z), which equals arccos(z / r)
    exactly but keeps transverse components below sqrt(ulp) * r that the
    arccos form would round away.
    """
    planar_sq = x * x + y * y
    planar = math.sqrt(planar_sq)
    r = math.sqrt(planar_sq + z * z)
    theta = math.atan2(planar, z) if r > EPS_RADIUS else 0.0
    if planar > EPS_RADIUS:
        phi = math.atan2(y, x)
        if phi <= -math.pi:
            phi = math.pi
    else:
        phi = 0.0
    return PolarTranslation(phi=phi, theta=theta, r=r)


def polar_to_cartesian(p: PolarTranslation) -> tuple:
    rst = p.r * math.sin(p.theta)
    return (rst * math.cos(p.phi), rst * math.sin(p.phi), p.r * math.cos(p.theta))


def fit_gaussians(samples: Sequence[ActionSample],
                  spec: NormalizationSpec) -> GaussianParams:
    """Population mean/std per axis over {theta, phi, r, roll, pitch, yaw}.

    Sums go through math.fsum, so the fit is exactly permutation-invariant
    and reproducible. Standard deviations are floored at SIGMA_FLOOR.
    """
    if not samples:
        raise ValueError("empty dataset")
    raw = np.array([s.values() for s in samples], dtype=np.float64)
    norm = normalize_batch(raw, spec)
    columns = [[] for _ in AXES]
    for row in norm:
        pol = cartesian_to_polar(float(row[0]), float(row[1]), float(row[2]))
        for i, value in enumerate((pol.theta, pol.phi, pol.r,
                                   float(row[3]), float(row[4]), float(row[5]))):
            columns[i].append(value)
    n = len(samples)
    mu = []
    sigma = []
    for col in columns:
        m = math.fsum(col) / n
        var = math.fsum((v - m) ** 2 for v in col) / n
        mu.append(m)
        sigma.append(max(math.sqrt(var), SIGMA_FLOOR))
    return GaussianParams(mu=tuple(mu), sigma=tuple(sigma), sample_count=n)
