"""Self-checks on a built grid: equal-mass sampling, PPF round-trips,
linearization bijectivity, and codec idempotence.

All randomness flows from one seed, so a fixed seed reproduces the same
statistics bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .gaussian import gaussian_cdf, gaussian_ppf
from .grid import (ActionGrid, delinearize_rot, delinearize_trans,
                   linearize_rot, linearize_trans, polar_bin_indices)
from .stats import AXES

DEFAULT_MC_SAMPLES = 200_000
EQUAL_MASS_MAX_SIGMAS = 4.0
PPF_ROUNDTRIP_TOL = 1e-10


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    stats: dict = field(default_factory=dict)


def truncated_gaussian_sample(n: int, mu: float, sigma: float, lo: float,
                              hi: float, rng: np.random.Generator) -> np.ndarray:
    """n draws from N(mu, sigma^2) conditioned on [lo, hi].

    Rejection sampling from the untruncated Gaussian; when the in-range mass
    is too small for rejection to terminate quickly, falls back to
    inverse-CDF sampling of uniform levels.
    """
    p_lo = gaussian_cdf(lo, mu, sigma)
    p_hi = gaussian_cdf(hi, mu, sigma)
    mass = p_hi - p_lo
    if mass < 1e-8:
        levels = rng.uniform(p_lo, p_hi, size=n)
        return np.array([gaussian_ppf(p, mu, sigma) for p in levels])
    out = np.empty(n, dtype=np.float64)
    filled = 0
    while filled < n:
        batch = max(1024, int((n - filled) / mass * 1.2))
        draws = rng.normal(mu, sigma, size=batch)
        keep = draws[(draws >= lo) & (draws <= hi)]
        take = min(n - filled, keep.size)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out


def check_equal_mass(grid: ActionGrid, samples: int = DEFAULT_MC_SAMPLES,
                     seed: int = 0) -> list[CheckResult]:
    """Empirical bin frequencies must sit within 4 binomial sigmas of 1/M."""
    rng = np.random.default_rng(seed)
    results = []
    for axis, part in zip(AXES, grid.partitions):
        draws = truncated_gaussian_sample(samples, part.mu, part.sigma,
                                          part.range_lo, part.range_hi, rng)
        indices = np.clip(np.searchsorted(part.boundaries, draws, side="right") - 1,
                          0, part.m - 1)
        counts = np.bincount(indices, minlength=part.m)
        expected = samples / part.m
        sd = np.sqrt(samples * (1.0 / part.m) * (1.0 - 1.0 / part.m))
        max_dev = float(np.max(np.abs(counts - expected)) / sd)
        results.append(CheckResult(
            name=f"equal-mass/{axis}",
            passed=max_dev <= EQUAL_MASS_MAX_SIGMAS,
            stats={"axis": axis, "bins": part.m, "samples": samples,
                   "max_dev_sigmas": max_dev}))
    return results


def check_ppf_roundtrip(grid: ActionGrid, points: int = 1000) -> list[CheckResult]:
    """|cdf(ppf(p)) - p| over a log-spaced probability grid, per axis."""
    half = points // 2
    low = np.geomspace(1e-6, 0.5, half)
    levels = np.concatenate([low, 1.0 - low[::-1]])
    results = []
    for axis, part in zip(AXES, grid.partitions):
        worst = 0.0
        for p in levels.tolist():
            x = gaussian_ppf(p, part.mu, part.sigma)
            worst = max(worst, abs(gaussian_cdf(x, part.mu, part.sigma) - p))
        results.append(CheckResult(
            name=f"ppf-roundtrip/{axis}",
            passed=worst < PPF_ROUNDTRIP_TOL,
            stats={"axis": axis, "points": levels.size, "max_abs_dev": worst}))
    return results


def check_bijectivity(grid: ActionGrid) -> CheckResult:
    """linearize/delinearize must be mutual inverses over both index cubes."""
    spec = grid.spec
    ok = True
    for local_id in range(spec.m_trans):
        triple = delinearize_trans(local_id, spec)
        if linearize_trans(*triple, spec) != local_id:
            ok = False
            break
    if ok:
        for local_id in range(spec.m_rot):
            triple = delinearize_rot(local_id, spec)
            if linearize_rot(*triple, spec) != local_id:
                ok = False
                break
    return CheckResult(name="linearize-bijectivity", passed=ok,
                       stats={"m_trans": spec.m_trans, "m_rot": spec.m_rot})


def random_token_triples(grid: ActionGrid, n: int,
                         rng: np.random.Generator) -> np.ndarray:
    tokens = np.empty((n, 3), dtype=np.int64)
    tokens[:, 0] = rng.integers(0, grid.m_trans, size=n)
    tokens[:, 1] = grid.m_trans + rng.integers(0, grid.m_rot, size=n)
    tokens[:, 2] = grid.grip_closed_token + rng.integers(0, 2, size=n)
    return tokens


def random_normalized_actions(n: int, rng: np.random.Generator) -> np.ndarray:
    actions = np.empty((n, 7), dtype=np.float64)
    actions[:, :6] = rng.uniform(-1.0, 1.0, size=(n, 6))
    actions[:, 6] = rng.uniform(0.0, 1.0, size=n)
    return actions


def check_codec_idempotence(grid: ActionGrid, n: int = 10_000,
                            seed: int = 0) -> list[CheckResult]:
    """encode(decode(t)) == t, and decode(encode(a)) stays in a's bins."""
    rng = np.random.default_rng(seed)
    tokens = random_token_triples(grid, n, rng)
    decoded = kernels.decode_batch(tokens, grid)
    re_encoded = kernels.encode_batch(decoded, grid)
    fixed_point = bool(np.array_equal(tokens, re_encoded))
    results = [CheckResult(name="codec-fixed-point", passed=fixed_point,
                           stats={"triples": n})]

    actions = random_normalized_actions(n, rng)
    encoded = kernels.encode_batch(actions, grid)
    round_trip = kernels.decode_batch(encoded, grid)
    mismatches = 0
    for i in range(n):
        if polar_bin_indices(actions[i], grid) != polar_bin_indices(round_trip[i], grid):
            mismatches += 1
    results.append(CheckResult(name="codec-bin-membership", passed=mismatches == 0,
                               stats={"actions": n, "mismatches": mismatches}))
    return results


def run_all(grid: ActionGrid, samples: int = DEFAULT_MC_SAMPLES,
            seed: int = 0) -> list[CheckResult]:
    results = []
    results.extend(check_equal_mass(grid, samples=samples, seed=seed))
    results.extend(check_ppf_roundtrip(grid))
    results.append(check_bijectivity(grid))
    results.extend(check_codec_idempotence(grid, seed=seed))
    return results
