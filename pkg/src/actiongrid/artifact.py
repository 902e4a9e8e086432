"""Serialized codec artifacts.

Grid artifact: a single deterministic text document holding the format
version, token layout, grid spec, normalizer, Gaussian parameters, and the
full boundary/representative arrays (17 significant digits, so doubles
round-trip exactly).

Embedding table: a short text header (format version, grid artifact hash,
row/dim counts, byte order, element type) followed by a raw little-endian
float32 row-major payload after the "binary" delimiter line.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .adapt import EmbeddingTable
from .grid import ActionGrid, AxisPartition, GridSpec, TOKEN_LAYOUT
from .stats import AXES, VARIABLES, GaussianParams, NormalizationSpec

GRID_MAGIC = "ACTIONGRID-ARTIFACT"
EMBED_MAGIC = "ACTIONGRID-EMBED"
FORMAT_VERSION = 1


class ArtifactError(ValueError):
    """Unreadable or inconsistent artifact file."""


def _f(x: float) -> str:
    # >= 17 significant digits: enough to reproduce any double bit-exactly
    return format(float(x), ".17g")


@dataclass(frozen=True)
class GridArtifact:
    """Everything that fixes a codec instance."""

    normalizer: NormalizationSpec
    gaussians: GaussianParams
    grid: ActionGrid
    version: int = FORMAT_VERSION


def dumps_grid_artifact(artifact: GridArtifact) -> str:
    grid = artifact.grid
    norm = artifact.normalizer
    gauss = artifact.gaussians
    lines = [
        f"{GRID_MAGIC} v{artifact.version}",
        f"layout {grid.layout}",
        f"representative {grid.representative}",
        f"vocab {grid.vocab}",
        f"quantiles {_f(norm.q_low)} {_f(norm.q_high)}",
        f"samples {gauss.sample_count}",
    ]
    for name, lo, hi in zip(VARIABLES, norm.lo, norm.hi):
        lines.append(f"norm {name} {_f(lo)} {_f(hi)}")
    for axis, part, mu, sigma in zip(AXES, grid.partitions, gauss.mu, gauss.sigma):
        lines.append(f"bins {axis} {part.m}")
        lines.append(f"range {axis} {_f(part.range_lo)} {_f(part.range_hi)}")
        lines.append(f"gauss {axis} {_f(mu)} {_f(sigma)}")
    for axis, part in zip(AXES, grid.partitions):
        lines.append(f"boundaries {axis} " + " ".join(_f(b) for b in part.boundaries))
        lines.append(f"representatives {axis} "
                     + " ".join(_f(r) for r in part.representatives))
    lines.append("end")
    return "\n".join(lines) + "\n"


def write_grid_artifact(artifact: GridArtifact, path) -> None:
    text = dumps_grid_artifact(artifact)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def loads_grid_artifact(text: str) -> GridArtifact:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ArtifactError("empty grid artifact")
    head = lines[0].split()
    if len(head) != 2 or head[0] != GRID_MAGIC:
        raise ArtifactError(f"not a grid artifact (first line {lines[0]!r})")
    if head[1] != f"v{FORMAT_VERSION}":
        raise ArtifactError(f"unsupported grid artifact version {head[1]!r}")
    if lines[-1] != "end":
        raise ArtifactError("truncated grid artifact (missing 'end')")

    fields = {}
    norm = {}
    bins = {}
    ranges = {}
    gauss = {}
    boundaries = {}
    representatives = {}
    for line in lines[1:-1]:
        key, _, rest = line.partition(" ")
        try:
            if key in ("layout", "representative", "vocab", "quantiles", "samples"):
                fields[key] = rest
            elif key == "norm":
                name, lo, hi = rest.split()
                norm[name] = (float(lo), float(hi))
            elif key == "bins":
                axis, m = rest.split()
                bins[axis] = int(m)
            elif key == "range":
                axis, lo, hi = rest.split()
                ranges[axis] = (float(lo), float(hi))
            elif key == "gauss":
                axis, mu, sigma = rest.split()
                gauss[axis] = (float(mu), float(sigma))
            elif key == "boundaries":
                axis, *values = rest.split()
                boundaries[axis] = tuple(float(v) for v in values)
            elif key == "representatives":
                axis, *values = rest.split()
                representatives[axis] = tuple(float(v) for v in values)
            else:
                raise ArtifactError(f"unknown grid artifact key {key!r}")
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ArtifactError):
                raise
            raise ArtifactError(f"malformed line {line!r}: {exc}") from None

    for key in ("layout", "representative", "vocab", "quantiles", "samples"):
        if key not in fields:
            raise ArtifactError(f"missing '{key}' line")
    if fields["layout"] != TOKEN_LAYOUT:
        raise ArtifactError(f"unsupported token layout {fields['layout']!r}")
    missing = [a for a in AXES if a not in bins or a not in gauss
               or a not in boundaries or a not in representatives]
    if missing:
        raise ArtifactError(f"missing per-axis data for {missing}")
    if any(v not in norm for v in VARIABLES):
        raise ArtifactError("missing normalizer lines")

    try:
        q_low_s, q_high_s = fields["quantiles"].split()
        normalizer = NormalizationSpec(
            lo=tuple(norm[v][0] for v in VARIABLES),
            hi=tuple(norm[v][1] for v in VARIABLES),
            q_low=float(q_low_s), q_high=float(q_high_s))
        gaussians = GaussianParams(
            mu=tuple(gauss[a][0] for a in AXES),
            sigma=tuple(gauss[a][1] for a in AXES),
            sample_count=int(fields["samples"]))
        spec = GridSpec(**{"m_" + a: bins[a] for a in AXES})
        parts = []
        for axis in AXES:
            parts.append(AxisPartition(
                axis=axis, mu=gauss[axis][0], sigma=gauss[axis][1],
                boundaries=boundaries[axis],
                representatives=representatives[axis]))
        grid = ActionGrid(spec=spec, partitions=tuple(parts),
                          representative=fields["representative"])
    except ValueError as exc:
        raise ArtifactError(f"inconsistent grid artifact: {exc}") from None

    if grid.vocab != int(fields["vocab"]):
        raise ArtifactError(f"vocab line says {fields['vocab']}, "
                            f"spec yields {grid.vocab}")
    for axis, part in zip(AXES, grid.partitions):
        if axis in ranges and ranges[axis] != (part.range_lo, part.range_hi):
            raise ArtifactError(f"range line for '{axis}' does not match "
                                "its boundaries")
    return GridArtifact(normalizer=normalizer, gaussians=gaussians, grid=grid)


def read_grid_artifact(path) -> GridArtifact:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_grid_artifact(fh.read())


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_header_binary(path, magic: str, fields: list, payload: bytes) -> None:
    """Shared container format: text header lines, 'binary' delimiter, payload."""
    header = [f"{magic} v{FORMAT_VERSION}"]
    header.extend(f"{k} {v}" for k, v in fields)
    header.append("binary")
    blob = ("\n".join(header) + "\n").encode("ascii") + payload
    with open(path, "wb") as fh:
        fh.write(blob)


def read_header_binary(path, magic: str):
    """Returns (fields dict, payload bytes) for a header+binary container."""
    with open(path, "rb") as fh:
        blob = fh.read()
    marker = b"\nbinary\n"
    cut = blob.find(marker)
    if cut < 0:
        raise ArtifactError(f"missing 'binary' delimiter in {path}")
    header_lines = blob[:cut].decode("ascii").splitlines()
    payload = blob[cut + len(marker):]
    head = header_lines[0].split()
    if len(head) != 2 or head[0] != magic:
        raise ArtifactError(f"not a {magic} file (first line "
                            f"{header_lines[0]!r})")
    if head[1] != f"v{FORMAT_VERSION}":
        raise ArtifactError(f"unsupported {magic} version {head[1]!r}")
    fields = {}
    for line in header_lines[1:]:
        key, _, rest = line.partition(" ")
        fields[key] = rest
    return fields, payload


def write_embedding_table(table: EmbeddingTable, path, grid_sha256: str = "unbound"):
    """Store a table as float32 little-endian, bound to a grid artifact hash."""
    payload = np.ascontiguousarray(table.vectors, dtype="<f4").tobytes()
    fields = [
        ("grid-sha256", grid_sha256),
        ("rows", table.rows),
        ("dim", table.dim),
        ("byte-order", "little-endian"),
        ("dtype", "float32"),
    ]
    write_header_binary(path, EMBED_MAGIC, fields, payload)


def read_embedding_table(path, *, grid: ActionGrid | None = None,
                         grid_sha256: str | None = None):
    """Load a table; validates rows against the grid and the recorded hash."""
    fields, payload = read_header_binary(path, EMBED_MAGIC)
    try:
        rows = int(fields["rows"])
        dim = int(fields["dim"])
    except (KeyError, ValueError) as exc:
        raise ArtifactError(f"bad embedding header: {exc}") from None
    if fields.get("dtype") != "float32" or fields.get("byte-order") != "little-endian":
        raise ArtifactError("embedding payload must be little-endian float32")
    expected = rows * dim * 4
    if len(payload) != expected:
        raise ArtifactError(f"embedding payload is {len(payload)} bytes, "
                            f"expected {expected}")
    if grid is not None and rows != grid.vocab:
        raise ArtifactError(f"embedding table has {rows} rows, grid vocabulary "
                            f"is {grid.vocab}")
    recorded = fields.get("grid-sha256", "unbound")
    if grid_sha256 is not None and recorded not in ("unbound", grid_sha256):
        raise ArtifactError("embedding table is bound to a different grid artifact")
    vectors = np.frombuffer(payload, dtype="<f4").reshape(rows, dim).copy()
    return EmbeddingTable(vectors=vectors)
