"""Equal-probability action grids: partition, linearize, encode, decode.

Each of the six axes is split into bins carrying equal probability mass under
its fitted Gaussian restricted to the fixed axis range. Bin index triples are
flattened row-major in digitization order, (theta, phi, r) for translation and
(roll, pitch, yaw) for rotation, and the flat vocabulary is laid out as
[translation block | rotation block | gripper closed, gripper open].
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gaussian import gaussian_cdf, gaussian_ppf, truncated_mean
from .stats import (AXES, GaussianParams, NormalizationSpec, cartesian_to_polar,
                    normalize_batch)

RANGE_THETA = (0.0, math.pi)
RANGE_PHI = (-math.pi, math.pi)
RANGE_R = (0.0, math.sqrt(3.0))
RANGE_ROTATION = (-1.0, 1.0)
AXIS_RANGES = {
    "theta": RANGE_THETA,
    "phi": RANGE_PHI,
    "r": RANGE_R,
    "roll": RANGE_ROTATION,
    "pitch": RANGE_ROTATION,
    "yaw": RANGE_ROTATION,
}

GRIPPER_TOKENS = 2
REPRESENTATIVE_MODES = ("truncmean", "midpoint")

#: recorded in serialized artifacts so token IDs are self-describing
TOKEN_LAYOUT = "trans:theta,phi,r|rot:roll,pitch,yaw|grip:closed,open row-major"

#: per-axis error labels of the normalized action vector, report order
REPORT_AXES = ("x", "y", "z", "roll", "pitch", "yaw", "grip")


@dataclass(frozen=True)
class GridSpec:
    """Bin counts per axis. V = m_theta*m_phi*m_r + m_roll*m_pitch*m_yaw + 2."""

    m_theta: int = 16
    m_phi: int = 32
    m_r: int = 8
    m_roll: int = 16
    m_pitch: int = 16
    m_yaw: int = 16

    def __post_init__(self):
        for axis in AXES:
            if self.bins(axis) < 1:
                raise ValueError(f"bin count for '{axis}' must be >= 1")

    def bins(self, axis: str) -> int:
        return getattr(self, "m_" + axis)

    @property
    def m_trans(self) -> int:
        return self.m_theta * self.m_phi * self.m_r

    @property
    def m_rot(self) -> int:
        return self.m_roll * self.m_pitch * self.m_yaw

    @property
    def vocab(self) -> int:
        return self.m_trans + self.m_rot + GRIPPER_TOKENS


@dataclass(frozen=True)
class AxisPartition:
    """Equal-mass split of one axis under its range-truncated Gaussian."""

    axis: str
    mu: float
    sigma: float
    boundaries: tuple
    representatives: tuple

    def __post_init__(self):
        b = self.boundaries
        reps = self.representatives
        if len(b) != len(reps) + 1:
            raise ValueError(f"'{self.axis}': {len(b)} boundaries cannot delimit "
                             f"{len(reps)} bins")
        if any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise ValueError(f"'{self.axis}': boundaries are not strictly increasing")
        if any(not b[i] < reps[i] < b[i + 1] for i in range(len(reps))):
            raise ValueError(f"'{self.axis}': representative outside its bin")

    @property
    def m(self) -> int:
        return len(self.representatives)

    @property
    def range_lo(self) -> float:
        return self.boundaries[0]

    @property
    def range_hi(self) -> float:
        return self.boundaries[-1]


@dataclass(frozen=True)
class TokenTriple:
    """The 3 token IDs for one action step: translation, rotation, gripper."""

    t_trans: int
    t_rot: int
    t_grip: int

    def astuple(self) -> tuple:
        return (self.t_trans, self.t_rot, self.t_grip)


@dataclass(frozen=True)
class ActionGrid:
    """Per-axis partitions with the flat [trans | rot | grip] token layout."""

    spec: GridSpec
    partitions: tuple
    representative: str = "truncmean"

    def __post_init__(self):
        if len(self.partitions) != len(AXES):
            raise ValueError("one partition per axis required")
        for axis, part in zip(AXES, self.partitions):
            if part.axis != axis:
                raise ValueError(f"partition order must follow {AXES}, found "
                                 f"'{part.axis}' where '{axis}' belongs")
            if part.m != self.spec.bins(axis):
                raise ValueError(f"'{axis}': partition has {part.m} bins, "
                                 f"spec says {self.spec.bins(axis)}")
        if self.representative not in REPRESENTATIVE_MODES:
            raise ValueError(f"unknown representative mode '{self.representative}'")

    def partition(self, axis: str) -> AxisPartition:
        return self.partitions[AXES.index(axis)]

    @property
    def vocab(self) -> int:
        return self.spec.vocab

    @property
    def m_trans(self) -> int:
        return self.spec.m_trans

    @property
    def m_rot(self) -> int:
        return self.spec.m_rot

    @property
    def grip_closed_token(self) -> int:
        return self.m_trans + self.m_rot

    @property
    def grip_open_token(self) -> int:
        return self.m_trans + self.m_rot + 1

    @property
    def layout(self) -> str:
        return TOKEN_LAYOUT


def build_axis_partition(mu: float, sigma: float, range_lo: float, range_hi: float,
                         m: int, *, axis: str = "axis",
                         representative: str = "truncmean") -> AxisPartition:
    """Split [range_lo, range_hi] into m bins of equal truncated-Gaussian mass.

    Interior boundaries are PPF values of equally spaced CDF levels between
    cdf(range_lo) and cdf(range_hi). Representatives are the truncated
    conditional mean of each bin (or the midpoint, by mode), nudged strictly
    inside the bin so decoding is a fixed point of encoding.
    """
    if not range_lo < range_hi:
        raise ValueError(f"invalid range [{range_lo}, {range_hi}]")
    if m < 1:
        raise ValueError(f"bin count must be >= 1, got {m}")
    if representative not in REPRESENTATIVE_MODES:
        raise ValueError(f"unknown representative mode '{representative}'")
    p_lo = gaussian_cdf(range_lo, mu, sigma)
    p_hi = gaussian_cdf(range_hi, mu, sigma)
    if not p_lo < p_hi:
        raise ValueError(f"'{axis}': no resolvable probability mass in "
                         f"[{range_lo}, {range_hi}] for N({mu}, {sigma}^2)")
    span = p_hi - p_lo
    boundaries = [range_lo]
    for i in range(1, m):
        boundaries.append(gaussian_ppf(p_lo + span * i / m, mu, sigma))
    boundaries.append(range_hi)
    representatives = []
    for i in range(m):
        lo, hi = boundaries[i], boundaries[i + 1]
        if representative == "truncmean":
            rep = truncated_mean(lo, hi, mu, sigma)
        else:
            rep = 0.5 * (lo + hi)
        rep = min(max(rep, math.nextafter(lo, math.inf)), math.nextafter(hi, -math.inf))
        representatives.append(rep)
    return AxisPartition(axis=axis, mu=mu, sigma=sigma,
                         boundaries=tuple(boundaries),
                         representatives=tuple(representatives))


def build_action_grid(params: GaussianParams, spec: GridSpec,
                      representative: str = "truncmean") -> ActionGrid:
    """One equal-mass partition per axis over the paper-fixed ranges."""
    partitions = []
    for i, axis in enumerate(AXES):
        lo, hi = AXIS_RANGES[axis]
        partitions.append(build_axis_partition(
            params.mu[i], params.sigma[i], lo, hi, spec.bins(axis),
            axis=axis, representative=representative))
    return ActionGrid(spec=spec, partitions=tuple(partitions),
                      representative=representative)


def digitize(value: float, partition: AxisPartition) -> int:
    """Bin index under half-open bins [b_i, b_{i+1}); out-of-range clamps.

    The value must be finite.
    """
    i = bisect_right(partition.boundaries, value) - 1
    if i < 0:
        return 0
    if i >= partition.m:
        return partition.m - 1
    return i


def _check_index(index: int, count: int, axis: str) -> None:
    if not 0 <= index < count:
        raise ValueError(f"'{axis}' index {index} outside [0, {count})")


def linearize_trans(i_theta: int, i_phi: int, i_r: int, spec: GridSpec) -> int:
    """Row-major flatten of a translation index triple, digitization order."""
    _check_index(i_theta, spec.m_theta, "theta")
    _check_index(i_phi, spec.m_phi, "phi")
    _check_index(i_r, spec.m_r, "r")
    return (i_theta * spec.m_phi + i_phi) * spec.m_r + i_r


def delinearize_trans(local_id: int, spec: GridSpec) -> tuple:
    if not 0 <= local_id < spec.m_trans:
        raise ValueError(f"translation id {local_id} outside [0, {spec.m_trans})")
    i_theta, rest = divmod(local_id, spec.m_phi * spec.m_r)
    i_phi, i_r = divmod(rest, spec.m_r)
    return (i_theta, i_phi, i_r)


def linearize_rot(i_roll: int, i_pitch: int, i_yaw: int, spec: GridSpec) -> int:
    _check_index(i_roll, spec.m_roll, "roll")
    _check_index(i_pitch, spec.m_pitch, "pitch")
    _check_index(i_yaw, spec.m_yaw, "yaw")
    return (i_roll * spec.m_pitch + i_pitch) * spec.m_yaw + i_yaw


def delinearize_rot(local_id: int, spec: GridSpec) -> tuple:
    if not 0 <= local_id < spec.m_rot:
        raise ValueError(f"rotation id {local_id} outside [0, {spec.m_rot})")
    i_roll, rest = divmod(local_id, spec.m_pitch * spec.m_yaw)
    i_pitch, i_yaw = divmod(rest, spec.m_yaw)
    return (i_roll, i_pitch, i_yaw)


def validate_tokens(tokens: TokenTriple, grid: ActionGrid) -> None:
    """Raise unless the triple respects the grid's token layout."""
    if not 0 <= tokens.t_trans < grid.m_trans:
        raise ValueError(f"translation token {tokens.t_trans} outside "
                         f"[0, {grid.m_trans})")
    if not grid.m_trans <= tokens.t_rot < grid.m_trans + grid.m_rot:
        raise ValueError(f"rotation token {tokens.t_rot} outside "
                         f"[{grid.m_trans}, {grid.m_trans + grid.m_rot})")
    if tokens.t_grip not in (grid.grip_closed_token, grid.grip_open_token):
        raise ValueError(f"gripper token {tokens.t_grip} not in "
                         f"{{{grid.grip_closed_token}, {grid.grip_open_token}}}")


def encode_action(norm_action: Sequence[float], grid: ActionGrid) -> TokenTriple:
    """Tokenize one normalized action (x, y, z, roll, pitch, yaw, grip).

    Translation goes through the polar transform before digitization; the
    gripper opens strictly above 0.5.
    """
    from . import kernels
    row = np.asarray(norm_action, dtype=np.float64).reshape(1, 7)
    ids = kernels.encode_batch(row, grid)[0]
    return TokenTriple(int(ids[0]), int(ids[1]), int(ids[2]))


def decode_tokens(tokens: TokenTriple, grid: ActionGrid) -> np.ndarray:
    """Normalized 7-vector for a token triple.

    Each axis decodes to its bin representative (strictly inside the bin);
    the polar representative converts back to Cartesian; the gripper decodes
    to exactly 0.0 or 1.0.
    """
    from . import kernels
    validate_tokens(tokens, grid)
    arr = np.array([tokens.astuple()], dtype=np.int64)
    return kernels.decode_batch(arr, grid)[0]


@dataclass(frozen=True)
class QuantizationReport:
    """Round-trip error of decode(encode(.)) in normalized units."""

    mse: dict
    max_abs_error: dict
    max_error: float
    occupancy: Counter
    sample_count: int


def quantization_report(samples, spec: NormalizationSpec,
                        grid: ActionGrid) -> QuantizationReport:
    """Per-axis MSE / max error and token occupancy over a dataset."""
    from . import kernels
    if len(samples) == 0:
        raise ValueError("empty dataset")
    raw = np.array([s.values() for s in samples], dtype=np.float64)
    norm = normalize_batch(raw, spec)
    tokens = kernels.encode_batch(norm, grid)
    decoded = kernels.decode_batch(tokens, grid)
    err = decoded - norm
    mse = {}
    max_abs = {}
    for i, name in enumerate(REPORT_AXES):
        mse[name] = float(np.mean(err[:, i] ** 2))
        max_abs[name] = float(np.max(np.abs(err[:, i])))
    occupancy = Counter(int(t) for t in tokens.ravel())
    return QuantizationReport(mse=mse, max_abs_error=max_abs,
                              max_error=float(np.max(np.abs(err))),
                              occupancy=occupancy, sample_count=len(samples))


def polar_bin_indices(norm_action: Sequence[float], grid: ActionGrid) -> tuple:
    """Per-axis bin indices of a normalized action, in AXES order.

    Test/verification helper: composes cartesian_to_polar with digitize, so
    bin membership of encode/decode round trips can be checked per axis.
    """
    a = [float(v) for v in norm_action]
    pol = cartesian_to_polar(a[0], a[1], a[2])
    values = (pol.theta, pol.phi, pol.r, a[3], a[4], a[5])
    return tuple(digitize(v, p) for v, p in zip(values, grid.partitions))
