"""Acceptance suite: one test per release criterion, at pinned tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per
criterion. Every criterion prints PASS only after its assertions held.
"""

import itertools

import numpy as np
import pytest

from actiongrid import (EmbeddingTable, GaussianParams, GridSpec,
                        adapt_embeddings, build_action_grid,
                        compute_normalizer, decode_batch, encode_batch,
                        fit_gaussians, quantization_report)
from actiongrid.cli import main
from actiongrid.ego3d import (CameraIntrinsics, MlpWeights, back_project,
                              fuse_features, mlp_forward, patch_average,
                              sinusoidal_encode)
from actiongrid.gaussian import gaussian_cdf, gaussian_ppf
from actiongrid.grid import polar_bin_indices
from actiongrid.verify import (check_equal_mass, random_normalized_actions,
                               random_token_triples)

from conftest import actions_to_samples, synthetic_actions, write_dataset

CONTINUOUS_AXES = ("x", "y", "z", "roll", "pitch", "yaw")


def _report(name: str) -> None:
    print(f"ACCEPTANCE PASS {name}")


@pytest.fixture(scope="module")
def corpus():
    """Synthetic Gaussian action dataset, seed 0, 50 000 steps (criterion 5)."""
    actions = synthetic_actions(50_000, seed=0)
    samples = actions_to_samples(actions)
    normalizer = compute_normalizer(samples)
    gaussians = fit_gaussians(samples, normalizer)
    return actions, samples, normalizer, gaussians


@pytest.fixture(scope="module")
def fitted_default(corpus):
    _, _, normalizer, gaussians = corpus
    return normalizer, gaussians, build_action_grid(gaussians, GridSpec())


def test_vocabulary_arithmetic(fitted_default):
    normalizer, _, grid = fitted_default
    assert GridSpec().vocab == 8194
    assert grid.vocab == 8194
    chunk = random_normalized_actions(4, np.random.default_rng(0))
    tokens = encode_batch(chunk, grid)
    assert tokens.shape == (4, 3)
    assert tokens.size == 12  # 4-step chunk -> 12 spatial action tokens
    _report("vocabulary arithmetic: V=8194, 4-step chunk = 12 tokens")


def test_resolution_ablation_arithmetic():
    spec = GridSpec(8, 8, 8, 8, 8, 8)
    assert spec.m_trans == 512
    assert spec.m_rot == 512
    assert spec.vocab == 1026
    _report("resolution ablation: M_trans = M_rot = 512 -> V = 1026")


def test_equal_mass_partition(fitted_default, tmp_path, corpus):
    _, _, grid = fitted_default
    results = check_equal_mass(grid, samples=200_000, seed=0)
    worst = max(r.stats["max_dev_sigmas"] for r in results)
    assert all(r.passed for r in results), worst
    assert worst <= 4.0

    # cmd_verify exits 0 on a freshly fitted artifact
    actions, _, _, _ = corpus
    dataset = tmp_path / "episodes.jsonl"
    write_dataset(dataset, actions[:5000])
    artifact = tmp_path / "grid.txt"
    assert main(["fit", str(dataset), "-o", str(artifact)]) == 0
    assert main(["verify", str(artifact), "--samples", "200000",
                 "--seed", "0"]) == 0
    _report(f"equal-mass partition: all bins within 4 binomial sigmas "
            f"(worst {worst:.2f}); cmd_verify exit 0")


def test_codec_round_trip(fitted_default):
    _, _, grid = fitted_default
    rng = np.random.default_rng(0)
    actions = random_normalized_actions(10_000, rng)
    round_trip = decode_batch(encode_batch(actions, grid), grid)
    for i in range(actions.shape[0]):
        assert polar_bin_indices(actions[i], grid) == \
            polar_bin_indices(round_trip[i], grid)
    tokens = random_token_triples(grid, 10_000, rng)
    re_encoded = encode_batch(decode_batch(tokens, grid), grid)
    assert np.array_equal(tokens, re_encoded)
    _report("codec round-trip: bin membership 1.0 over 10k actions, "
            "encode(decode(t)) == t over 10k triples")


def test_quantization_monotonicity(corpus):
    _, samples, normalizer, gaussians = corpus
    fine = build_action_grid(gaussians, GridSpec())                # V = 8194
    coarse = build_action_grid(gaussians, GridSpec(8, 8, 8, 8, 8, 8))  # V = 1026
    fine_report = quantization_report(samples, normalizer, fine)
    coarse_report = quantization_report(samples, normalizer, coarse)
    for axis in CONTINUOUS_AXES:
        assert fine_report.mse[axis] < coarse_report.mse[axis], axis
    _report("quantization monotonicity: per-axis MSE strictly lower at "
            "V=8194 than at V=1026 (50k steps, seed 0)")


def test_ppf_precision():
    low = np.geomspace(1e-6, 0.5, 500)
    levels = np.concatenate([low, 1.0 - low[::-1]])
    assert levels.size == 1000
    worst = 0.0
    for mu, sigma in ((0.0, 1.0), (1.5, 0.4)):
        for p in levels.tolist():
            x = gaussian_ppf(p, mu, sigma)
            worst = max(worst, abs(gaussian_cdf(x, mu, sigma) - p))
    assert worst < 1e-10
    _report(f"PPF precision: |cdf(ppf(p)) - p| < 1e-10 over 1000 "
            f"log-spaced probabilities (worst {worst:.2e})")


def test_identity_adaptation(fitted_default):
    _, _, grid = fitted_default
    rng = np.random.default_rng(0)
    table = EmbeddingTable(rng.normal(size=(grid.vocab, 64)).astype(np.float32))
    new_table, plan = adapt_embeddings(grid, table, grid)
    diff = np.max(np.abs(new_table.vectors.astype(np.float64)
                         - table.vectors.astype(np.float64)))
    assert diff <= 1e-12
    for entry in plan.entries:
        total = sum(w for _, w in entry.sources)
        assert abs(total - 1.0) <= 1e-12
        assert all(w >= 0.0 for _, w in entry.sources)
    _report("identity adaptation: table reproduced (max diff "
            f"{diff:.1e}) and weights form a simplex at 1e-12 (V=8194, d=64)")


def test_trilinear_oracle_equivalence():
    params_old = GaussianParams(mu=(1.5, 0.0, 0.5, 0.0, 0.0, 0.0),
                                sigma=(0.4, 1.0, 0.2, 0.3, 0.3, 0.3),
                                sample_count=10)
    params_new = GaussianParams(mu=(1.2, 0.4, 0.7, 0.1, -0.1, 0.05),
                                sigma=(0.5, 0.8, 0.3, 0.2, 0.4, 0.25),
                                sample_count=10)
    spec = GridSpec(2, 2, 2, 2, 2, 2)
    old_grid = build_action_grid(params_old, spec)
    new_grid = build_action_grid(params_new, spec)
    vectors = np.zeros((old_grid.vocab, 3))
    for i, j, k in itertools.product(range(2), range(2), range(2)):
        vectors[(i * 2 + j) * 2 + k] = (i, j, k)
    new_table, _ = adapt_embeddings(old_grid, EmbeddingTable(vectors), new_grid)

    old_parts = old_grid.partitions[:3]
    worst = 0.0
    for i, j, k in itertools.product(range(2), range(2), range(2)):
        centroid = (new_grid.partitions[0].representatives[i],
                    new_grid.partitions[1].representatives[j],
                    new_grid.partitions[2].representatives[k])
        # brute-force trilinear oracle on the 2x2x2 cell
        expected = np.zeros(3)
        axis_pairs = []
        for value, part in zip(centroid, old_parts):
            lo, hi = part.representatives
            if value <= lo:
                axis_pairs.append([(0, 1.0)])
            elif value >= hi:
                axis_pairs.append([(1, 1.0)])
            else:
                f = (value - lo) / (hi - lo)
                axis_pairs.append([(0, 1.0 - f), (1, f)])
        for (ai, wi), (aj, wj), (ak, wk) in itertools.product(*axis_pairs):
            expected += np.array((ai, aj, ak), dtype=float) * wi * wj * wk
        token = (i * 2 + j) * 2 + k
        worst = max(worst, float(np.max(np.abs(new_table.vectors[token]
                                               - expected))))
    assert worst <= 1e-12
    _report(f"trilinear oracle equivalence on 2x2x2 one-hot grid "
            f"(max diff {worst:.1e})")


def test_ego3d_zero_init_contract():
    rng = np.random.default_rng(0)
    intr = CameraIntrinsics(fx=120.0, fy=110.0, cx=14.0, cy=14.0,
                            width=28, height=28)
    pm = back_project(rng.uniform(0.5, 3.0, size=(28, 28)), intr)
    feats = sinusoidal_encode(pm, freq_count=34)
    assert feats.shape[-1] == 204
    patches = patch_average(feats, 14, valid=pm.valid)
    weights = MlpWeights.zeros(d_in=204, hidden=1152, d_out=1152)
    position = mlp_forward(patches, weights)
    visual = rng.normal(size=position.shape)
    assert np.array_equal(fuse_features(visual, position), visual)
    _report("Ego3D zero-init: zero MLP weights leave X untouched; "
            "feature width 204 for L=34")


def test_back_projection_geometry():
    intr = CameraIntrinsics(fx=600.0, fy=580.0, cx=111.5, cy=112.5,
                            width=224, height=224)
    u = np.arange(intr.width) - intr.cx
    v = np.arange(intr.height) - intr.cy
    worst = 0.0
    for normal, offset in (((0.0, 0.0, 1.0), 1.0),
                           ((0.1, -0.2, 1.0), 1.5),
                           ((-0.05, 0.15, 1.0), 0.8)):
        denom = (normal[0] * u[None, :] / intr.fx
                 + normal[1] * v[:, None] / intr.fy + normal[2])
        depth = offset / denom
        assert np.all(depth > 0)
        pts = back_project(depth, intr).points.reshape(-1, 3)
        design = np.column_stack([pts[:, 0], pts[:, 1], np.ones(len(pts))])
        coef, *_ = np.linalg.lstsq(design, pts[:, 2], rcond=None)
        worst = max(worst, float(np.max(np.abs(design @ coef - pts[:, 2]))))
    assert worst < 1e-6

    rng = np.random.default_rng(0)
    depth = rng.uniform(0.5, 3.0, size=(intr.height, intr.width))
    pm1 = back_project(depth, intr)
    pm2 = back_project(2.0 * depth, intr)
    assert np.array_equal(pm2.points, 2.0 * pm1.points)
    _report(f"back-projection geometry: plane residual {worst:.1e} < 1e-6; "
            "depth scaling by 2 scales points exactly")


def test_serialization_determinism(corpus, tmp_path):
    actions, _, _, _ = corpus
    dataset = tmp_path / "episodes.jsonl"
    write_dataset(dataset, actions[:5000])
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    assert main(["fit", str(dataset), "-o", str(a)]) == 0
    assert main(["fit", str(dataset), "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()

    from actiongrid import read_grid_artifact, write_grid_artifact
    loaded = read_grid_artifact(a)
    c = tmp_path / "c.txt"
    write_grid_artifact(loaded, c)
    assert c.read_bytes() == a.read_bytes()
    _report("serialization determinism: double fit byte-identical; "
            "read -> write bit-exact")
