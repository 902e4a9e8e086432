import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actiongrid.stats import (ActionSample, DatasetError, NormalizationSpec,
                              cartesian_to_polar, compute_normalizer,
                              denormalize, fit_gaussians, load_dataset,
                              normalize, polar_to_cartesian)

# polar oracle for (1, 1, 1), from direct evaluation of the closed forms
POLAR_111 = (math.pi / 4, 0.9553166181245092, 1.7320508075688772)


def _line(action, episode="ep0", step=0):
    return json.dumps({"episode_id": episode, "step": step, "action": action})


def _samples_from_columns(**columns):
    n = max(len(v) for v in columns.values())
    base = {"x": 0.0, "y": 0.0, "z": 0.0, "roll": 0.0, "pitch": 0.0,
            "yaw": 0.0, "grip": 0.5}
    out = []
    for i in range(n):
        fields = dict(base)
        for name, values in columns.items():
            fields[name] = values[i]
        out.append(ActionSample(**fields, episode_id="ep", step=i))
    return out


# ---------------------------------------------------------------------------
# load_dataset

def test_load_two_lines_in_order(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text(_line([1, 2, 3, 0, 0, 0, 1], step=0) + "\n"
                    + _line([4, 5, 6, 0, 0, 0, 0], step=1) + "\n")
    samples = load_dataset(path)
    assert len(samples) == 2
    assert samples[0].x == 1 and samples[1].x == 4
    assert samples[0].step == 0 and samples[1].step == 1


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_dataset(path) == []


def test_load_skips_blank_lines(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text(_line([0] * 6 + [1]) + "\n\n   \n" + _line([0] * 6 + [0]) + "\n")
    assert len(load_dataset(path)) == 2


def test_load_from_byte_stream():
    stream = io.BytesIO(_line([0, 0, 0, 0, 0, 0, 0.5]).encode() + b"\n")
    samples = load_dataset(stream)
    assert len(samples) == 1
    assert samples[0].grip == 0.5


def test_load_names_bad_line():
    text = "\n".join([_line([0] * 6 + [1]), _line([0] * 6 + [1]),
                      _line(["text", 0, 0, 0, 0, 0, 1])])
    with pytest.raises(DatasetError, match="line 3"):
        load_dataset(io.BytesIO(text.encode()))


def test_load_invalid_json_names_line():
    with pytest.raises(DatasetError, match="line 1"):
        load_dataset(io.BytesIO(b"{not json}\n"))


def test_load_missing_field_named():
    record = json.dumps({"episode_id": "e", "action": [0] * 7})
    with pytest.raises(DatasetError, match="step"):
        load_dataset(io.BytesIO(record.encode()))


def test_load_rejects_non_finite():
    text = '{"episode_id": "e", "step": 0, "action": [NaN, 0, 0, 0, 0, 0, 1]}'
    with pytest.raises(DatasetError, match="finite"):
        load_dataset(io.BytesIO(text.encode()))


def test_load_rejects_wrong_arity():
    with pytest.raises(DatasetError, match="7 numbers"):
        load_dataset(io.BytesIO(_line([1, 2, 3]).encode()))


def test_sample_rejects_grip_out_of_range():
    with pytest.raises(ValueError, match="grip"):
        ActionSample(0, 0, 0, 0, 0, 0, 1.5)


# ---------------------------------------------------------------------------
# compute_normalizer

def test_normalizer_minmax_quantiles():
    samples = _samples_from_columns(x=[-2.0, -1.0, 0.0, 1.0, 2.0])
    spec = compute_normalizer(samples, q_low=0.0, q_high=1.0)
    assert spec.lo[0] == -2.0 and spec.hi[0] == 2.0


def test_normalizer_widens_degenerate_axis():
    samples = _samples_from_columns(x=[0.5, 0.5, 0.5])
    spec = compute_normalizer(samples, q_low=0.0, q_high=1.0)
    assert spec.lo[0] == pytest.approx(0.5 - 1e-6, abs=1e-12)
    assert spec.hi[0] == pytest.approx(0.5 + 1e-6, abs=1e-12)


def test_normalizer_uniform_draws_match_order_statistics():
    rng = np.random.default_rng(42)
    draws = rng.uniform(0.0, 1.0, size=10_000)
    samples = _samples_from_columns(x=draws.tolist())
    spec = compute_normalizer(samples, q_low=0.01, q_high=0.99)
    # full-sort oracle: nearest order statistic
    ordered = np.sort(draws)
    oracle_lo = ordered[round(0.01 * (draws.size - 1))]
    oracle_hi = ordered[round(0.99 * (draws.size - 1))]
    assert spec.lo[0] == pytest.approx(oracle_lo, abs=5e-3)
    assert spec.hi[0] == pytest.approx(oracle_hi, abs=5e-3)
    assert spec.lo[0] == pytest.approx(0.01, abs=0.01)
    assert spec.hi[0] == pytest.approx(0.99, abs=0.01)


def test_normalizer_rejects_empty():
    with pytest.raises(ValueError, match="empty"):
        compute_normalizer([])


def test_normalizer_rejects_bad_quantiles():
    samples = _samples_from_columns(x=[0.0, 1.0])
    with pytest.raises(ValueError):
        compute_normalizer(samples, q_low=0.9, q_high=0.1)


# ---------------------------------------------------------------------------
# normalize / denormalize

def _spec_pm_half():
    return NormalizationSpec(lo=(-0.5,) * 6, hi=(0.5,) * 6, q_low=0.0, q_high=1.0)


def test_normalize_midpoint_and_bounds():
    spec = _spec_pm_half()
    mid = ActionSample(0, 0, 0, 0, 0, 0, 0.3)
    assert normalize(mid, spec)[0] == 0.0
    top = ActionSample(0.5, 0, 0, 0, 0, 0, 0.3)
    assert normalize(top, spec)[0] == 1.0
    clipped = ActionSample(0.9, 0, 0, 0, 0, 0, 0.3)
    assert normalize(clipped, spec)[0] == 1.0


def test_normalize_exact_at_clip_bounds():
    spec = NormalizationSpec(lo=(-0.37, -1, -1, -1, -1, -1),
                             hi=(0.81, 1, 1, 1, 1, 1), q_low=0.0, q_high=1.0)
    assert normalize(ActionSample(-0.37, 0, 0, 0, 0, 0, 0), spec)[0] == -1.0
    assert normalize(ActionSample(0.81, 0, 0, 0, 0, 0, 0), spec)[0] == 1.0


def test_normalize_passes_grip_through():
    spec = _spec_pm_half()
    assert normalize(ActionSample(0, 0, 0, 0, 0, 0, 0.73), spec)[6] == 0.73


def test_denormalize_trivials():
    spec = _spec_pm_half()
    assert denormalize(np.array([0.0] * 7), spec)[0] == 0.0
    assert denormalize(np.array([-1.0] + [0.0] * 6), spec)[0] == -0.5


def test_normalize_monotone():
    spec = _spec_pm_half()
    values = np.linspace(-0.7, 0.7, 29)
    normed = [normalize(ActionSample(float(v), 0, 0, 0, 0, 0, 0), spec)[0]
              for v in values]
    assert all(a <= b for a, b in zip(normed, normed[1:]))


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.5, 0.5, allow_nan=False))
def test_denormalize_inverts_normalize(v):
    spec = _spec_pm_half()
    vec = normalize(ActionSample(v, 0, 0, 0, 0, 0, 0), spec)
    assert denormalize(vec, spec)[0] == pytest.approx(v, abs=1e-12)


# ---------------------------------------------------------------------------
# polar conversion

def test_polar_axis_cases():
    p = cartesian_to_polar(1.0, 0.0, 0.0)
    assert (p.phi, p.theta, p.r) == (0.0, math.pi / 2, 1.0)
    p = cartesian_to_polar(0.0, 0.0, 1.0)
    assert (p.phi, p.theta, p.r) == (0.0, 0.0, 1.0)


def test_polar_derived_111():
    p = cartesian_to_polar(1.0, 1.0, 1.0)
    assert p.phi == pytest.approx(POLAR_111[0], abs=1e-12)
    assert p.theta == pytest.approx(POLAR_111[1], abs=1e-12)
    assert p.r == pytest.approx(POLAR_111[2], abs=1e-12)


def test_polar_zero_radius_convention():
    p = cartesian_to_polar(0.0, 0.0, 0.0)
    assert (p.phi, p.theta, p.r) == (0.0, 0.0, 0.0)
    assert polar_to_cartesian(p) == (0.0, 0.0, 0.0)


def test_polar_negative_zero_y_folds_to_positive_pi():
    p = cartesian_to_polar(-1.0, -0.0, 0.0)
    assert p.phi == math.pi


@settings(max_examples=300, deadline=None)
@given(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)))
def test_polar_round_trip(v):
    x, y, z = v
    if math.sqrt(x * x + y * y + z * z) <= 1e-6:
        return
    p = cartesian_to_polar(x, y, z)
    assert 0.0 <= p.theta <= math.pi
    assert -math.pi < p.phi <= math.pi
    assert p.r >= 0.0
    back = polar_to_cartesian(p)
    err = math.dist((x, y, z), back)
    assert err < 1e-9


def test_polar_radius_bounded_for_normalized_inputs():
    rng = np.random.default_rng(3)
    for _ in range(500):
        x, y, z = rng.uniform(-1, 1, size=3)
        assert cartesian_to_polar(x, y, z).r <= math.sqrt(3.0) + 1e-12


# ---------------------------------------------------------------------------
# fit_gaussians

def test_fit_constant_samples_hits_sigma_floor():
    samples = _samples_from_columns(roll=[0.25] * 5)
    spec = NormalizationSpec(lo=(-1,) * 6, hi=(1,) * 6, q_low=0.0, q_high=1.0)
    params = fit_gaussians(samples, spec)
    assert params.sigma[3] == 1e-6
    assert params.mu[3] == pytest.approx(0.25, abs=1e-12)


def test_fit_population_convention():
    samples = _samples_from_columns(roll=[-1.0, 1.0])
    spec = NormalizationSpec(lo=(-1,) * 6, hi=(1,) * 6, q_low=0.0, q_high=1.0)
    params = fit_gaussians(samples, spec)
    assert params.mu[3] == 0.0
    assert params.sigma[3] == 1.0  # population sigma, not n-1


def test_fit_recovers_seeded_gaussian():
    rng = np.random.default_rng(11)
    draws = rng.normal(0.2, 0.3, size=100_000)
    samples = _samples_from_columns(roll=draws.tolist())
    spec = NormalizationSpec(lo=(-1,) * 6, hi=(1,) * 6, q_low=0.0, q_high=1.0)
    params = fit_gaussians(samples, spec)
    clipped = np.clip(draws, -1.0, 1.0)
    assert params.mu[3] == pytest.approx(float(np.mean(clipped)), abs=1e-9)
    assert params.sigma[3] == pytest.approx(float(np.std(clipped)), abs=1e-9)
    assert abs(params.mu[3] - 0.2) < 0.01
    assert abs(params.sigma[3] - 0.3) < 0.01


def test_fit_permutation_invariant():
    rng = np.random.default_rng(5)
    actions = rng.uniform(-0.02, 0.02, size=(500, 7))
    actions[:, 6] = rng.uniform(0, 1, size=500)
    samples = [ActionSample(*row) for row in actions.tolist()]
    spec = compute_normalizer(samples)
    params = fit_gaussians(samples, spec)
    shuffled = list(samples)
    rng.shuffle(shuffled)
    params2 = fit_gaussians(shuffled, spec)
    assert params.mu == params2.mu
    assert params.sigma == params2.sigma


def test_fit_rejects_empty():
    spec = NormalizationSpec(lo=(-1,) * 6, hi=(1,) * 6, q_low=0.0, q_high=1.0)
    with pytest.raises(ValueError, match="empty"):
        fit_gaussians([], spec)
