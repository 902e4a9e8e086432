"""Batch encode/decode kernel dispatch.

The compiled extension is preferred when importable; otherwise the
pure-Python twin takes over. Set ACTIONGRID_PURE_KERNELS=1 to force the
fallback (used by the benchmark and parity tests).
"""

from __future__ import annotations

import os
import weakref

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

if os.environ.get("ACTIONGRID_PURE_KERNELS"):
    _impl = _kernels_py
else:
    _impl = _compiled if _compiled is not None else _kernels_py

BACKEND = "pure" if _impl is _kernels_py else "compiled"


def compiled_module():
    """The compiled kernel module, or None when unavailable."""
    return _compiled


def pure_module():
    return _kernels_py


class KernelTables:
    """Flat boundary/representative arrays of a grid, as the kernels want them."""

    __slots__ = ("bounds", "bounds_off", "reps", "reps_off", "m",
                 "m_trans", "m_rot", "__weakref__")

    def __init__(self, grid):
        bounds = [np.asarray(p.boundaries, dtype=np.float64) for p in grid.partitions]
        reps = [np.asarray(p.representatives, dtype=np.float64) for p in grid.partitions]
        self.bounds = np.ascontiguousarray(np.concatenate(bounds))
        self.bounds_off = np.cumsum([0] + [b.size for b in bounds]).astype(np.int64)
        self.reps = np.ascontiguousarray(np.concatenate(reps))
        self.reps_off = np.cumsum([0] + [r.size for r in reps]).astype(np.int64)
        self.m = np.array([p.m for p in grid.partitions], dtype=np.int64)
        self.m_trans = int(grid.m_trans)
        self.m_rot = int(grid.m_rot)


_TABLES = weakref.WeakKeyDictionary()


def tables_for(grid) -> KernelTables:
    tables = _TABLES.get(grid)
    if tables is None:
        tables = KernelTables(grid)
        _TABLES[grid] = tables
    return tables


def encode_batch(actions: np.ndarray, grid, impl=None) -> np.ndarray:
    """Encode an (N, 7) normalized action array into (N, 3) token IDs."""
    arr = np.ascontiguousarray(actions, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 7:
        raise ValueError(f"expected an (N, 7) action array, got shape "
                         f"{np.asarray(actions).shape}")
    t = tables_for(grid)
    out = np.empty((arr.shape[0], 3), dtype=np.int64)
    (impl or _impl).encode_batch(arr, t.bounds, t.bounds_off, t.m,
                                 t.m_trans, t.m_rot, out)
    return out


def decode_batch(tokens: np.ndarray, grid, impl=None) -> np.ndarray:
    """Decode an (N, 3) token-ID array into (N, 7) normalized actions."""
    raw = np.asarray(tokens)
    if not np.issubdtype(raw.dtype, np.integer):
        raise ValueError(f"token array must be integer-typed, got {raw.dtype}")
    arr = np.ascontiguousarray(raw, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected an (N, 3) token array, got shape {raw.shape}")
    t = tables_for(grid)
    out = np.empty((arr.shape[0], 7), dtype=np.float64)
    bad = (impl or _impl).decode_batch(arr, t.reps, t.reps_off, t.m,
                                       t.m_trans, t.m_rot, out)
    if bad >= 0:
        raise ValueError(f"invalid token triple at row {bad}: "
                         f"{arr[bad].tolist()} (V={t.m_trans + t.m_rot + 2})")
    return out
