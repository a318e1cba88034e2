import numpy as np
import pytest

from brakesense.core import ClassLabel, Epoch, EpochSet, default_montage


@pytest.fixture(scope="session")
def montage():
    return default_montage()


def make_epochs(montage, labels, n_samples=40, rate=200, scale=1.0, seed=0,
                t0_offset=100):
    """Small random epoch set for plumbing tests."""
    rng = np.random.default_rng(seed)
    eps = tuple(
        Epoch(label,
              (scale * rng.standard_normal((montage.n_channels, n_samples)))
              .astype(np.float32), t0_offset)
        for label in labels)
    return EpochSet(montage, rate, eps)


@pytest.fixture
def tiny_set(montage):
    labels = [ClassLabel.EMERGENCY] * 4 + [ClassLabel.NO_BRAKING] * 4
    return make_epochs(montage, labels)
