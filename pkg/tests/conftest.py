"""Shared fixtures: the standard training corpus and models built from it.

Everything is seeded, so fixture-dependent expectations are stable across
runs. The full corpus takes a few seconds to synthesize and train on; the
small corpus exists for tests that only need a working model.
"""

from __future__ import annotations

import numpy as np
import pytest

from streaklite import classifier, simulate


@pytest.fixture(scope="session")
def full_dataset():
    """The standard-recipe corpus (>= 130k rows, 60:40 labels)."""
    config = simulate.DatasetConfig()
    samples, rows = simulate.generate_dataset(simulate.DEFAULT_TRAIN_FRAMES, config, seed=7)
    return samples, rows


@pytest.fixture(scope="session")
def model(full_dataset):
    """Classifier trained on the full corpus with the default config."""
    _, rows = full_dataset
    return classifier.train(rows.x, rows.y, classifier.TrainConfig(seed=1))


@pytest.fixture(scope="session")
def small_dataset():
    """A 150-frame corpus for cheap model-dependent tests."""
    config = simulate.DatasetConfig()
    samples, rows = simulate.generate_dataset(150, config, seed=11)
    return samples, rows


@pytest.fixture(scope="session")
def small_model(small_dataset):
    _, rows = small_dataset
    return classifier.train(rows.x, rows.y, classifier.TrainConfig(seed=2))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
