"""Grid re-discretization support: trilinear re-initialization of embeddings.

When a grid is refit on a new action distribution, each new translation or
rotation token takes its embedding from the enclosing cell of old-grid
representatives, combined with standard trilinear weights. Gripper rows have
no geometry and are copied positionally.
"""

from __future__ import annotations

import itertools
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .grid import ActionGrid


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """V x d token-embedding matrix indexed by a grid's token layout."""

    vectors: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.vectors)
        if arr.ndim != 2:
            raise ValueError(f"embedding table must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding table contains non-finite entries")
        object.__setattr__(self, "vectors", arr)

    @property
    def rows(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class TokenPlan:
    """Provenance of one new token: (old global ID, weight) pairs."""

    token: int
    sources: tuple
    clamped_axes: tuple = ()


@dataclass(frozen=True)
class AdaptationPlan:
    entries: tuple

    def summary(self) -> dict:
        """Neighbor-count histogram, weight extremes, and clamp count."""
        counts = {}
        w_min, w_max = 1.0, 0.0
        clamped = 0
        for entry in self.entries:
            k = len(entry.sources)
            counts[k] = counts.get(k, 0) + 1
            for _, w in entry.sources:
                w_min = min(w_min, w)
                w_max = max(w_max, w)
            if entry.clamped_axes:
                clamped += 1
        return {"tokens": len(self.entries), "neighbor_counts": counts,
                "min_weight": w_min, "max_weight": w_max,
                "clamped_tokens": clamped}


def _axis_neighbors(value, reps):
    """Bracketing representative indices with their interpolation weights.

    Zero-weight neighbors are dropped, so an exact hit yields a single pair.
    Values outside the representative span clamp to the nearest one; the
    second return flags that case.
    """
    m = len(reps)
    if value <= reps[0]:
        return [(0, 1.0)], value < reps[0]
    if value >= reps[m - 1]:
        return [(m - 1, 1.0)], value > reps[m - 1]
    j = bisect_right(reps, value) - 1
    f = (value - reps[j]) / (reps[j + 1] - reps[j])
    if f <= 0.0:
        return [(j, 1.0)], False
    return [(j, 1.0 - f), (j + 1, f)], False


def trilinear_weights(new_centroid, old_partitions):
    """Up to 8 (index triple, weight) pairs over the enclosing old-grid cell.

    new_centroid holds per-axis representative coordinates and
    old_partitions the three matching AxisPartition objects.
    """
    pairs, _ = _cell_weights(new_centroid, old_partitions)
    return pairs


def _cell_weights(new_centroid, old_partitions):
    per_axis = []
    clamped_axes = []
    for value, part in zip(new_centroid, old_partitions):
        neighbors, clamped = _axis_neighbors(value, part.representatives)
        per_axis.append(neighbors)
        if clamped:
            clamped_axes.append(part.axis)
    pairs = []
    for (i, wi), (j, wj), (k, wk) in itertools.product(*per_axis):
        pairs.append(((i, j, k), wi * wj * wk))
    return pairs, tuple(clamped_axes)


def adapt_embeddings(old_grid: ActionGrid, old_table: EmbeddingTable,
                     new_grid: ActionGrid):
    """Initialize a new grid's embedding table from an old one (with plan).

    Returns (new EmbeddingTable, AdaptationPlan). Accumulation runs in
    float64 and the result keeps the input dtype, so adapting a grid onto
    itself reproduces the table exactly.
    """
    if old_table.rows != old_grid.vocab:
        raise ValueError(f"embedding table has {old_table.rows} rows, grid "
                         f"vocabulary is {old_grid.vocab}")
    if old_grid.layout != new_grid.layout:
        raise ValueError("old and new grids use different token layouts")
    old64 = old_table.vectors.astype(np.float64)
    out = np.zeros((new_grid.vocab, old_table.dim), dtype=np.float64)
    entries = []
    entries.extend(_adapt_block(old_grid, new_grid, old64, out, "trans"))
    entries.extend(_adapt_block(old_grid, new_grid, old64, out, "rot"))
    out[new_grid.grip_closed_token] = old64[old_grid.grip_closed_token]
    out[new_grid.grip_open_token] = old64[old_grid.grip_open_token]
    new_table = EmbeddingTable(out.astype(old_table.vectors.dtype))
    return new_table, AdaptationPlan(entries=tuple(entries))


def _adapt_block(old_grid, new_grid, old64, out, block):
    if block == "trans":
        axes = slice(0, 3)
        old_offset = 0
        new_offset = 0
    else:
        axes = slice(3, 6)
        old_offset = old_grid.m_trans
        new_offset = new_grid.m_trans
    old_parts = old_grid.partitions[axes]
    new_parts = new_grid.partitions[axes]
    old_m2 = old_parts[1].m
    old_m3 = old_parts[2].m
    entries = []
    new_shape = [p.m for p in new_parts]
    for i, j, k in itertools.product(*(range(n) for n in new_shape)):
        centroid = (new_parts[0].representatives[i],
                    new_parts[1].representatives[j],
                    new_parts[2].representatives[k])
        pairs, clamped_axes = _cell_weights(centroid, old_parts)
        new_id = new_offset + (i * new_shape[1] + j) * new_shape[2] + k
        row = out[new_id]
        sources = []
        for (oi, oj, ok), w in pairs:
            old_id = old_offset + (oi * old_m2 + oj) * old_m3 + ok
            row += w * old64[old_id]
            sources.append((old_id, w))
        entries.append(TokenPlan(token=new_id, sources=tuple(sources),
                                 clamped_axes=clamped_axes))
    return entries
