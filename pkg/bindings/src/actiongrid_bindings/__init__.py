"""Numpy-buffer bindings for the actiongrid codec.

The bindings never reimplement codec math: every operation shells out to the
`actiongrid` CLI and speaks its documented artifact and stream formats, so
results are bit-identical to the CLI by construction. Grid handles are
immutable and safe to share across threads; each call works in its own
temporary directory.

Exposed surface: load_grid, fit, encode, decode, adapt.
"""

from __future__ import annotations

import json
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__version__ = "0.1.0"

_GRID_MAGIC = "ACTIONGRID-ARTIFACT"
_AXES = ("theta", "phi", "r", "roll", "pitch", "yaw")


class BindingError(RuntimeError):
    """A CLI invocation or artifact parse failed."""


@dataclass(frozen=True)
class BoundGrid:
    """Immutable handle over a grid artifact file.

    Mirrors the artifact exactly: boundaries and representatives are parsed
    from their 17-significant-digit decimal form, which round-trips doubles
    bit-exactly.
    """

    path: str
    vocab: int
    layout: str
    bins: dict
    boundaries: dict
    representatives: dict

    @property
    def m_trans(self) -> int:
        return self.bins["theta"] * self.bins["phi"] * self.bins["r"]

    @property
    def m_rot(self) -> int:
        return self.bins["roll"] * self.bins["pitch"] * self.bins["yaw"]

    @property
    def grip_closed_token(self) -> int:
        return self.m_trans + self.m_rot

    @property
    def grip_open_token(self) -> int:
        return self.m_trans + self.m_rot + 1


def _run_cli(args: list, cwd=None) -> str:
    cmd = [sys.executable, "-m", "actiongrid", *args]
    proc = subprocess.run(cmd, capture_output=True, text=True, cwd=cwd)
    if proc.returncode != 0:
        message = proc.stderr.strip() or proc.stdout.strip()
        raise BindingError(f"actiongrid {' '.join(args[:1])} failed "
                           f"(exit {proc.returncode}): {message}")
    return proc.stdout


def load_grid(path) -> BoundGrid:
    """Parse a grid artifact file into an immutable handle."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(f"{_GRID_MAGIC} v1"):
        raise BindingError(f"{path} is not a v1 grid artifact")
    vocab = None
    layout = None
    bins = {}
    boundaries = {}
    representatives = {}
    for line in lines[1:]:
        key, _, rest = line.partition(" ")
        if key == "vocab":
            vocab = int(rest)
        elif key == "layout":
            layout = rest
        elif key == "bins":
            axis, m = rest.split()
            bins[axis] = int(m)
        elif key == "boundaries":
            axis, *values = rest.split()
            arr = np.array([float(v) for v in values])
            arr.setflags(write=False)
            boundaries[axis] = arr
        elif key == "representatives":
            axis, *values = rest.split()
            arr = np.array([float(v) for v in values])
            arr.setflags(write=False)
            representatives[axis] = arr
    if vocab is None or layout is None or set(bins) != set(_AXES):
        raise BindingError(f"{path} is missing required artifact fields")
    return BoundGrid(path=str(path), vocab=vocab, layout=layout, bins=bins,
                     boundaries=boundaries, representatives=representatives)


def fit(dataset_path, spec: str | None = None, *, output=None,
        quantiles: str | None = None, representative: str | None = None,
        seed: int | None = None) -> str:
    """Fit a grid artifact from an episode dataset; returns the artifact path."""
    if output is None:
        output = str(Path(dataset_path).with_suffix(".grid"))
    args = ["fit", str(dataset_path), "-o", str(output)]
    if spec is not None:
        args += ["--spec", spec]
    if quantiles is not None:
        args += ["--quantiles", quantiles]
    if representative is not None:
        args += ["--representative", representative]
    if seed is not None:
        args += ["--seed", str(seed)]
    _run_cli(args)
    return str(output)


def _as_actions(actions) -> np.ndarray:
    arr = np.asarray(actions, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 7:
        raise ValueError(f"expected an (N, 7) action buffer, got shape "
                         f"{np.asarray(actions).shape}")
    return np.ascontiguousarray(arr)


def encode(grid: BoundGrid, actions) -> np.ndarray:
    """Encode an (N, 7) raw-action buffer to (N, 3) token IDs via the CLI."""
    arr = _as_actions(actions)
    if arr.shape[0] == 0:
        return np.empty((0, 3), dtype=np.int64)
    with tempfile.TemporaryDirectory(prefix="actiongrid-bind-") as tmp:
        dataset = Path(tmp) / "actions.jsonl"
        with open(dataset, "w", encoding="utf-8") as fh:
            for step, row in enumerate(arr.tolist()):
                fh.write(json.dumps({"episode_id": "buffer", "step": step,
                                     "action": row}) + "\n")
        tokens_path = Path(tmp) / "tokens.txt"
        _run_cli(["encode", str(dataset), "--grid", grid.path,
                  "-o", str(tokens_path)])
        tokens = _parse_token_lines(tokens_path.read_text(encoding="utf-8"))
    if tokens.shape[0] != arr.shape[0]:
        raise BindingError(f"CLI returned {tokens.shape[0]} triples for "
                           f"{arr.shape[0]} actions")
    return tokens


def _parse_token_lines(text: str) -> np.ndarray:
    rows = [[int(t) for t in line.split()]
            for line in text.splitlines() if line.strip()]
    return np.array(rows, dtype=np.int64).reshape(len(rows), 3)


def _validate_tokens(grid: BoundGrid, tokens: np.ndarray) -> None:
    t_trans, t_rot, t_grip = tokens[:, 0], tokens[:, 1], tokens[:, 2]
    bad = ((t_trans < 0) | (t_trans >= grid.m_trans)
           | (t_rot < grid.m_trans) | (t_rot >= grid.grip_closed_token)
           | ((t_grip != grid.grip_closed_token)
              & (t_grip != grid.grip_open_token)))
    if np.any(bad):
        row = int(np.argmax(bad))
        raise ValueError(f"invalid token triple at row {row}: "
                         f"{tokens[row].tolist()} (V={grid.vocab})")


def decode(grid: BoundGrid, tokens) -> np.ndarray:
    """Decode an (N, 3) token buffer to (N, 7) raw actions via the CLI."""
    raw = np.asarray(tokens)
    if raw.ndim != 2 or raw.shape[1] != 3:
        raise ValueError(f"expected an (N, 3) token buffer, got shape "
                         f"{raw.shape}")
    if not np.issubdtype(raw.dtype, np.integer):
        raise ValueError(f"token buffer must be integer-typed, got {raw.dtype}")
    arr = np.ascontiguousarray(raw, dtype=np.int64)
    if arr.shape[0] == 0:
        return np.empty((0, 7), dtype=np.float64)
    _validate_tokens(grid, arr)
    with tempfile.TemporaryDirectory(prefix="actiongrid-bind-") as tmp:
        tokens_path = Path(tmp) / "tokens.txt"
        with open(tokens_path, "w", encoding="utf-8") as fh:
            fh.writelines(f"{r[0]} {r[1]} {r[2]}\n" for r in arr.tolist())
        out_path = Path(tmp) / "actions.txt"
        _run_cli(["decode", str(tokens_path), "--grid", grid.path,
                  "-o", str(out_path)])
        rows = [[float(v) for v in line.split()]
                for line in out_path.read_text(encoding="utf-8").splitlines()
                if line.strip()]
    out = np.array(rows, dtype=np.float64).reshape(len(rows), 7)
    if out.shape[0] != arr.shape[0]:
        raise BindingError(f"CLI returned {out.shape[0]} actions for "
                           f"{arr.shape[0]} triples")
    return out


def adapt(old_artifact, old_table, dataset, *, out_grid=None, out_embed=None,
          out_plan=None) -> tuple:
    """Refit on a dataset and re-initialize embeddings; returns output paths."""
    base = Path(old_artifact).parent
    out_grid = str(out_grid or base / "adapted.grid")
    out_embed = str(out_embed or base / "adapted.embed")
    out_plan = str(out_plan or base / "adapted.plan.jsonl")
    _run_cli(["adapt", str(dataset), "--old-grid", str(old_artifact),
              "--old-embed", str(old_table), "--out-grid", out_grid,
              "--out-embed", out_embed, "--out-plan", out_plan])
    return out_grid, out_embed, out_plan
