"""Shared fixtures: lazily trained policies and common synthetic working points.

Training a policy takes several seconds, so every (task, mode) pair is fitted
at most once per test session and shared.  The working points are frozen:
reproduction-grade models use low noise with plenty of headroom under the
error thresholds, while the model-selection tests use a noisier dataset where
the BIC choice is still unambiguous.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

import se3ds
from se3ds import mixture as mixture_mod
from se3ds import policy as policy_mod

# low-noise working point for trained reproduction/acceptance models
FIXTURE_NOISE = 0.004
FIXTURE_SEED = 3
FIXTURE_K_RANGE = range(1, 7)

# noisier working point for the BIC model-selection tests
SELECTION_NOISE = 0.01
SELECTION_SEED = 1


@dataclasses.dataclass(frozen=True)
class TrainedBundle:
    task: se3ds.SyntheticTask
    dataset: se3ds.PreprocessedDataset
    mix: se3ds.MixtureModel
    policy: se3ds.Se3Policy


@pytest.fixture(scope="session")
def trained():
    """Factory returning a trained bundle for (task_name, mode), cached."""
    cache: dict[tuple[str, str], TrainedBundle] = {}

    def get(task_name: str, mode: str) -> TrainedBundle:
        key = (task_name, mode)
        if key not in cache:
            task = se3ds.generate(
                task_name, noise=FIXTURE_NOISE, seed=FIXTURE_SEED
            )
            dataset = se3ds.preprocess(task.demos, dt=task.dt)
            mix = mixture_mod.fit(
                dataset, mode=mode, k_range=FIXTURE_K_RANGE, seed=FIXTURE_SEED
            )
            pol = policy_mod.learn(dataset, mix, seed=FIXTURE_SEED)
            cache[key] = TrainedBundle(task, dataset, mix, pol)
        return cache[key]

    return get


def planted_linear_map_data(
    n: int = 400, seed: int = 5
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Noiseless single-component regression data from a known stable map.

    The attractor is the identity quaternion, whose tangent space is exactly
    the vector part of the ambient coordinates.  The scalar slot carries no
    data (every feature has first coordinate zero), so the planted matrix
    keeps the optimizer's initial -1 there and puts a negative-definite,
    non-symmetric 3x3 block on the vector coordinates; that makes recovery of
    the full matrix well-posed.

    Returns (a_true, features, targets) with targets = features @ a_true.T.
    """
    lower = np.array([[1.0, 0.0, 0.0], [0.3, 0.8, 0.0], [-0.2, 0.1, 0.9]])
    skew = np.array([[0.0, 0.2, -0.1], [-0.2, 0.0, 0.15], [0.1, -0.15, 0.0]])
    block = -(lower @ lower.T + 1e-4 * np.eye(3)) + skew
    a_true = np.zeros((4, 4))
    a_true[0, 0] = -1.0
    a_true[1:, 1:] = block
    rng = np.random.default_rng(seed)
    features = np.zeros((n, 4))
    features[:, 1:] = rng.uniform(-0.5, 0.5, size=(n, 3))
    targets = features @ a_true.T
    return a_true, features, targets
