"""Command-line surface: fit, encode, decode, adapt, verify, report, ego3d.

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
All subcommands are deterministic for a fixed seed, config, and inputs.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import adapt as adapt_mod
from . import ego3d
from . import kernels
from . import verify as verify_mod
from .artifact import (ArtifactError, GridArtifact, file_sha256,
                       read_embedding_table, read_grid_artifact,
                       write_embedding_table, write_grid_artifact)
from .grid import GridSpec, REPRESENTATIVE_MODES, build_action_grid
from .stats import (AXES, DatasetError, compute_normalizer, denormalize_batch,
                    fit_gaussians, load_dataset, normalize_batch)

DEFAULTS = {
    "seed": 0,
    "spec": "32,16,8,16,16,16",
    "quantiles": "0.01,0.99",
    "representative": "truncmean",
    "samples": 200_000,
}


class CliError(Exception):
    """Input or usage error; maps to exit code 2."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def parse_spec(text: str) -> GridSpec:
    """Bin counts in flag order m_phi, m_theta, m_r, m_roll, m_pitch, m_yaw."""
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"--spec must be 6 comma-separated integers, got {text!r}")
    if len(values) != 6:
        raise CliError(f"--spec must list 6 bin counts, got {len(values)}")
    m_phi, m_theta, m_r, m_roll, m_pitch, m_yaw = values
    try:
        return GridSpec(m_theta=m_theta, m_phi=m_phi, m_r=m_r,
                        m_roll=m_roll, m_pitch=m_pitch, m_yaw=m_yaw)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def parse_quantiles(text: str) -> tuple:
    try:
        q_low, q_high = (float(v) for v in text.split(","))
    except ValueError:
        raise CliError(f"--quantiles must be 'q_low,q_high', got {text!r}")
    return q_low, q_high


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for all Monte-Carlo draws (default 0)")
    parser.add_argument("--config", default=None,
                        help="JSON file with defaults for the flags below")
    parser.add_argument("--spec", default=None,
                        help="bin counts 'mphi,mtheta,mr,mroll,mpitch,myaw' "
                             f"(default {DEFAULTS['spec']})")
    parser.add_argument("--quantiles", default=None,
                        help="normalization clipping quantiles 'q_low,q_high' "
                             f"(default {DEFAULTS['quantiles']})")
    parser.add_argument("--representative", choices=REPRESENTATIVE_MODES,
                        default=None,
                        help="bin decode point: truncated mean or midpoint")
    parser.add_argument("--samples", type=int, default=None,
                        help="Monte-Carlo sample count for verify "
                             f"(default {DEFAULTS['samples']})")


def resolve_options(args) -> dict:
    """Defaults < config file < explicit flags."""
    options = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}")
        if not isinstance(loaded, dict):
            raise CliError(f"config {args.config} must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        options.update(loaded)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            options[key] = value
    return options


def _load_samples(path):
    samples = load_dataset(path)
    return samples


def _fit_artifact(dataset_path, options) -> GridArtifact:
    samples = _load_samples(dataset_path)
    if not samples:
        raise CliError("empty dataset")
    q_low, q_high = parse_quantiles(str(options["quantiles"]))
    spec = parse_spec(str(options["spec"]))
    normalizer = compute_normalizer(samples, q_low=q_low, q_high=q_high)
    gaussians = fit_gaussians(samples, normalizer)
    grid = build_action_grid(gaussians, spec,
                             representative=str(options["representative"]))
    return GridArtifact(normalizer=normalizer, gaussians=gaussians, grid=grid)


def cmd_fit(args) -> int:
    options = resolve_options(args)
    artifact = _fit_artifact(args.dataset, options)
    write_grid_artifact(artifact, args.output)
    print(f"vocab {artifact.grid.vocab}")
    for axis, mu, sigma in zip(AXES, artifact.gaussians.mu,
                               artifact.gaussians.sigma):
        print(f"{axis} mu={mu:.6g} sigma={sigma:.6g}")
    print(f"artifact written to {args.output}")
    return 0


def _read_tokens(path, grid):
    """Token triples plus their source line numbers; validates layout."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    triples = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise CliError(f"{path}: line {lineno}: expected 3 token ids, "
                           f"got {len(parts)}")
        try:
            ids = [int(p) for p in parts]
        except ValueError:
            raise CliError(f"{path}: line {lineno}: token ids must be integers")
        t_trans, t_rot, t_grip = ids
        if not 0 <= t_trans < grid.m_trans:
            raise CliError(f"{path}: line {lineno}: translation token {t_trans} "
                           f"outside [0, {grid.m_trans})")
        if not grid.m_trans <= t_rot < grid.m_trans + grid.m_rot:
            raise CliError(f"{path}: line {lineno}: rotation token {t_rot} outside "
                           f"[{grid.m_trans}, {grid.m_trans + grid.m_rot})")
        if t_grip not in (grid.grip_closed_token, grid.grip_open_token):
            raise CliError(f"{path}: line {lineno}: gripper token {t_grip} not in "
                           f"{{{grid.grip_closed_token}, {grid.grip_open_token}}}")
        triples.append(ids)
    return np.array(triples, dtype=np.int64).reshape(len(triples), 3)


def cmd_encode(args) -> int:
    artifact = read_grid_artifact(args.grid)
    samples = _load_samples(args.dataset)
    lines = []
    if samples:
        raw = np.array([s.values() for s in samples], dtype=np.float64)
        norm = normalize_batch(raw, artifact.normalizer)
        tokens = kernels.encode_batch(norm, artifact.grid)
        lines = [f"{t[0]} {t[1]} {t[2]}" for t in tokens.tolist()]
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    return 0


def cmd_decode(args) -> int:
    artifact = read_grid_artifact(args.grid)
    tokens = _read_tokens(args.tokens, artifact.grid)
    lines = []
    if tokens.shape[0]:
        norm = kernels.decode_batch(tokens, artifact.grid)
        raw = denormalize_batch(norm, artifact.normalizer)
        lines = [" ".join(_fmt(v) for v in row) for row in raw.tolist()]
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    return 0


def cmd_adapt(args) -> int:
    options = resolve_options(args)
    old_artifact = read_grid_artifact(args.old_grid)
    old_sha = file_sha256(args.old_grid)
    old_table = read_embedding_table(args.old_embed, grid=old_artifact.grid,
                                     grid_sha256=old_sha)
    # fit options default to the old artifact's configuration
    if args.spec is None and "spec" not in _config_keys(args):
        spec = old_artifact.grid.spec
        options["spec"] = (f"{spec.m_phi},{spec.m_theta},{spec.m_r},"
                           f"{spec.m_roll},{spec.m_pitch},{spec.m_yaw}")
    if args.quantiles is None and "quantiles" not in _config_keys(args):
        options["quantiles"] = (f"{old_artifact.normalizer.q_low!r},"
                                f"{old_artifact.normalizer.q_high!r}")
    if args.representative is None and "representative" not in _config_keys(args):
        options["representative"] = old_artifact.grid.representative

    new_artifact = _fit_artifact(args.dataset, options)
    new_table, plan = adapt_mod.adapt_embeddings(old_artifact.grid, old_table,
                                                 new_artifact.grid)
    write_grid_artifact(new_artifact, args.out_grid)
    write_embedding_table(new_table, args.out_embed,
                          grid_sha256=file_sha256(args.out_grid))
    summary = plan.summary()
    summary["record"] = "adaptation-summary"
    with open(args.out_plan, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(summary, sort_keys=True) + "\n")
        for axis, old_part, new_part in zip(AXES, old_artifact.grid.partitions,
                                            new_artifact.grid.partitions):
            fh.write(json.dumps({"record": "axis", "axis": axis,
                                 "old_bins": old_part.m, "new_bins": new_part.m,
                                 "old_mu": old_part.mu, "new_mu": new_part.mu,
                                 "old_sigma": old_part.sigma,
                                 "new_sigma": new_part.sigma},
                                sort_keys=True) + "\n")
    print(f"new grid written to {args.out_grid}")
    print(f"new embedding table written to {args.out_embed}")
    print(f"plan summary written to {args.out_plan}")
    return 0


def _config_keys(args) -> set:
    if not getattr(args, "config", None):
        return set()
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        return set(loaded) if isinstance(loaded, dict) else set()
    except (OSError, json.JSONDecodeError):
        return set()


def cmd_verify(args) -> int:
    options = resolve_options(args)
    artifact = read_grid_artifact(args.artifact)
    results = verify_mod.run_all(artifact.grid,
                                 samples=int(options["samples"]),
                                 seed=int(options["seed"]))
    all_passed = True
    for result in results:
        record = {"check": result.name, "pass": result.passed}
        record.update(result.stats)
        print(json.dumps(record, sort_keys=True))
        all_passed = all_passed and result.passed
    print(json.dumps({"check": "all", "pass": all_passed}, sort_keys=True))
    return 0 if all_passed else 1


def cmd_report(args) -> int:
    from .grid import quantization_report
    artifact = read_grid_artifact(args.grid)
    samples = _load_samples(args.dataset)
    if not samples:
        raise CliError("empty dataset")
    report = quantization_report(samples, artifact.normalizer, artifact.grid)
    lines = [json.dumps({"record": "summary", "samples": report.sample_count,
                         "vocab": artifact.grid.vocab,
                         "max_error": report.max_error}, sort_keys=True)]
    for axis in report.mse:
        lines.append(json.dumps({"record": "axis", "axis": axis,
                                 "mse": report.mse[axis],
                                 "max_abs_error": report.max_abs_error[axis]},
                                sort_keys=True))
    for token in sorted(report.occupancy):
        lines.append(json.dumps({"record": "occupancy", "token": token,
                                 "count": report.occupancy[token]},
                                sort_keys=True))
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_ego3d_backproject(args) -> int:
    depth = ego3d.read_depth(args.depth)
    intrinsics = ego3d.read_intrinsics(args.intrinsics)
    points = ego3d.back_project(depth, intrinsics)
    ego3d.write_points(args.output, points)
    return 0


def cmd_ego3d_encode_pos(args) -> int:
    depth = ego3d.read_depth(args.depth)
    intrinsics = ego3d.read_intrinsics(args.intrinsics)
    points = ego3d.back_project(depth, intrinsics)
    features = ego3d.sinusoidal_encode(points, freq_count=args.freqs)
    patches = ego3d.patch_average(features, patch_size=args.patch,
                                  valid=points.valid)
    out = patches.features
    if args.weights:
        weights = ego3d.read_mlp_weights(args.weights)
        out = ego3d.mlp_forward(patches, weights)
    ego3d.write_features(args.output, out)
    return 0


def cmd_ego3d_fuse(args) -> int:
    visual = ego3d.read_features(args.visual)
    position = ego3d.read_features(args.position)
    ego3d.write_features(args.output, ego3d.fuse_features(visual, position))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actiongrid",
        description="Equal-probability action grid codec and egocentric 3D "
                    "position features")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a grid artifact from an episode dataset")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True, help="grid artifact path")
    _common_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("encode", help="encode dataset steps to token triples")
    p.add_argument("dataset")
    p.add_argument("--grid", required=True, help="grid artifact path")
    p.add_argument("-o", "--output", required=True, help="token stream path")
    _common_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode token triples to raw actions")
    p.add_argument("tokens")
    p.add_argument("--grid", required=True, help="grid artifact path")
    p.add_argument("-o", "--output", required=True, help="action file path")
    _common_flags(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("adapt", help="refit on a new dataset and re-initialize "
                                     "embeddings by trilinear interpolation")
    p.add_argument("dataset", help="new episode dataset")
    p.add_argument("--old-grid", required=True)
    p.add_argument("--old-embed", required=True)
    p.add_argument("--out-grid", required=True)
    p.add_argument("--out-embed", required=True)
    p.add_argument("--out-plan", required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("verify", help="run statistical self-checks on an artifact")
    p.add_argument("artifact")
    _common_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="quantization error report for a dataset")
    p.add_argument("dataset")
    p.add_argument("--grid", required=True)
    p.add_argument("-o", "--output", default=None)
    _common_flags(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("ego3d", help="egocentric 3D position feature operations")
    egosub = p.add_subparsers(dest="ego3d_command", required=True)

    q = egosub.add_parser("backproject", help="depth map to camera-frame points")
    q.add_argument("--depth", required=True)
    q.add_argument("--intrinsics", required=True)
    q.add_argument("-o", "--output", required=True)
    q.set_defaults(func=cmd_ego3d_backproject)

    q = egosub.add_parser("encode-pos", help="per-patch sinusoidal position "
                                             "features, optionally through the MLP")
    q.add_argument("--depth", required=True)
    q.add_argument("--intrinsics", required=True)
    q.add_argument("--patch", type=int, default=ego3d.DEFAULT_PATCH)
    q.add_argument("--freqs", type=int, default=ego3d.DEFAULT_FREQ_COUNT)
    q.add_argument("--weights", default=None, help="MLP weights file")
    q.add_argument("-o", "--output", required=True)
    q.set_defaults(func=cmd_ego3d_encode_pos)

    q = egosub.add_parser("fuse", help="add position embeddings onto visual features")
    q.add_argument("--visual", required=True)
    q.add_argument("--position", required=True)
    q.add_argument("-o", "--output", required=True)
    q.set_defaults(func=cmd_ego3d_fuse)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream consumer (e.g. head) closed the pipe; die quietly
        import os
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except (CliError, DatasetError, ArtifactError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
