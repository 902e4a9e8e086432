import json

import numpy as np
import pytest

from actiongrid import (GaussianParams, GridSpec, build_action_grid,
                        compute_normalizer, fit_gaussians)
from actiongrid.stats import ActionSample


def synthetic_actions(n: int, seed: int = 0) -> np.ndarray:
    """Gaussian-ish synthetic episode steps in raw units, (n, 7)."""
    rng = np.random.default_rng(seed)
    actions = np.empty((n, 7))
    actions[:, 0:3] = rng.normal([0.004, -0.002, 0.003],
                                 [0.012, 0.010, 0.008], size=(n, 3))
    actions[:, 3:6] = rng.normal([0.0, 0.01, -0.02],
                                 [0.05, 0.04, 0.06], size=(n, 3))
    actions[:, 6] = rng.uniform(0.0, 1.0, size=n)
    return actions


def actions_to_samples(actions: np.ndarray) -> list:
    return [ActionSample(*row, episode_id=f"ep{i // 100}", step=i % 100)
            for i, row in enumerate(actions.tolist())]


def dataset_lines(actions: np.ndarray) -> str:
    lines = []
    for i, row in enumerate(actions.tolist()):
        lines.append(json.dumps({"episode_id": f"ep{i // 100}", "step": i % 100,
                                 "action": row}))
    return "\n".join(lines) + "\n"


def write_dataset(path, actions: np.ndarray) -> None:
    path.write_text(dataset_lines(actions), encoding="utf-8")


@pytest.fixture(scope="session")
def fitted():
    """Normalizer, Gaussians, and default grid fitted on 2000 synthetic steps."""
    samples = actions_to_samples(synthetic_actions(2000, seed=0))
    normalizer = compute_normalizer(samples)
    gaussians = fit_gaussians(samples, normalizer)
    grid = build_action_grid(gaussians, GridSpec())
    return samples, normalizer, gaussians, grid


@pytest.fixture(scope="session")
def default_grid(fitted):
    return fitted[3]


@pytest.fixture(scope="session")
def small_grid():
    """Hand-parameterized grid with a small vocabulary, no fitting involved."""
    params = GaussianParams(mu=(1.5, 0.1, 0.5, 0.0, -0.05, 0.02),
                            sigma=(0.4, 1.2, 0.2, 0.3, 0.25, 0.35),
                            sample_count=10)
    return build_action_grid(params, GridSpec(4, 6, 3, 4, 4, 4))
