"""Batch kernels: pure/compiled parity and the wrapper contracts."""

import numpy as np
import pytest

from actiongrid import kernels
from actiongrid.verify import random_normalized_actions, random_token_triples

compiled = kernels.compiled_module()
needs_compiled = pytest.mark.skipif(compiled is None,
                                    reason="compiled kernels unavailable")


def _edge_actions():
    rows = [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5],
        [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        [-1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 0.0],
        [-1.0, -0.0, 0.0, 0.0, 0.0, 0.0, 0.7],   # atan2 -pi fold
        [0.0, 0.0, 1e-12, 0.0, 0.0, 0.0, 0.5],   # sub-epsilon radius
        [0.0, 0.0, -1.0, 0.3, -0.3, 0.9, 0.500001],
    ]
    rng = np.random.default_rng(31)
    rand = random_normalized_actions(5000, rng)
    return np.vstack([np.array(rows), rand])


def test_encode_shapes_and_dtype(small_grid):
    out = kernels.encode_batch(np.zeros((4, 7)), small_grid)
    assert out.shape == (4, 3) and out.dtype == np.int64


def test_encode_empty_batch(small_grid):
    out = kernels.encode_batch(np.zeros((0, 7)), small_grid)
    assert out.shape == (0, 3)
    dec = kernels.decode_batch(np.zeros((0, 3), dtype=np.int64), small_grid)
    assert dec.shape == (0, 7)


def test_encode_rejects_bad_shape(small_grid):
    with pytest.raises(ValueError, match=r"\(N, 7\)"):
        kernels.encode_batch(np.zeros((4, 6)), small_grid)


def test_decode_rejects_bad_shape_and_dtype(small_grid):
    with pytest.raises(ValueError, match=r"\(N, 3\)"):
        kernels.decode_batch(np.zeros((4, 2), dtype=np.int64), small_grid)
    with pytest.raises(ValueError, match="integer"):
        kernels.decode_batch(np.zeros((4, 3)), small_grid)


def test_decode_reports_bad_row(small_grid):
    tokens = random_token_triples(small_grid, 10, np.random.default_rng(1))
    tokens[7, 0] = small_grid.vocab + 5
    with pytest.raises(ValueError, match="row 7"):
        kernels.decode_batch(tokens, small_grid)


def test_pure_encode_matches_scalar_route(small_grid):
    # the pure kernel against the composed scalar operations
    from actiongrid.grid import linearize_rot, linearize_trans, polar_bin_indices
    actions = _edge_actions()[:200]
    tokens = kernels.encode_batch(actions, small_grid, impl=kernels.pure_module())
    for row, t in zip(actions, tokens):
        bins = polar_bin_indices(row, small_grid)
        assert t[0] == linearize_trans(bins[0], bins[1], bins[2], small_grid.spec)
        assert t[1] == small_grid.m_trans + linearize_rot(bins[3], bins[4],
                                                          bins[5], small_grid.spec)


def test_pure_decode_reads_representatives(small_grid):
    from actiongrid.grid import delinearize_rot
    from actiongrid.stats import cartesian_to_polar
    tokens = random_token_triples(small_grid, 300, np.random.default_rng(8))
    decoded = kernels.decode_batch(tokens, small_grid,
                                   impl=kernels.pure_module())
    for t, row in zip(tokens, decoded):
        i_roll, i_pitch, i_yaw = delinearize_rot(int(t[1]) - small_grid.m_trans,
                                                 small_grid.spec)
        assert row[3] == small_grid.partition("roll").representatives[i_roll]
        assert row[4] == small_grid.partition("pitch").representatives[i_pitch]
        assert row[5] == small_grid.partition("yaw").representatives[i_yaw]
        pol = cartesian_to_polar(row[0], row[1], row[2])
        i_r = int(t[0]) % small_grid.spec.m_r
        assert pol.r == pytest.approx(
            small_grid.partition("r").representatives[i_r], rel=1e-12)


@needs_compiled
def test_compiled_encode_bit_identical_to_pure(default_grid):
    actions = _edge_actions()
    pure = kernels.encode_batch(actions, default_grid, impl=kernels.pure_module())
    fast = kernels.encode_batch(actions, default_grid, impl=compiled)
    assert np.array_equal(pure, fast)


@needs_compiled
def test_compiled_decode_bit_identical_to_pure(default_grid):
    tokens = random_token_triples(default_grid, 5000, np.random.default_rng(17))
    pure = kernels.decode_batch(tokens, default_grid, impl=kernels.pure_module())
    fast = kernels.decode_batch(tokens, default_grid, impl=compiled)
    assert pure.tobytes() == fast.tobytes()


@needs_compiled
def test_compiled_decode_reports_same_bad_row(small_grid):
    tokens = random_token_triples(small_grid, 20, np.random.default_rng(2))
    tokens[11, 2] = 1  # gripper id from the translation block
    for impl in (compiled, kernels.pure_module()):
        with pytest.raises(ValueError, match="row 11"):
            kernels.decode_batch(tokens, small_grid, impl=impl)


def test_env_var_forces_pure_backend():
    import os
    import subprocess
    import sys
    env = dict(os.environ, ACTIONGRID_PURE_KERNELS="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "from actiongrid import kernels; print(kernels.BACKEND)"],
        capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "pure"


def test_noncontiguous_input_accepted(small_grid):
    wide = np.zeros((10, 14))
    wide[:, ::2] = random_normalized_actions(10, np.random.default_rng(3))
    view = wide[:, ::2]
    assert not view.flags["C_CONTIGUOUS"]
    out = kernels.encode_batch(view, small_grid)
    assert np.array_equal(out, kernels.encode_batch(np.ascontiguousarray(view),
                                                    small_grid))
