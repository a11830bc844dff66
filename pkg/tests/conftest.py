import numpy as np
import pytest

from rankflow import build_ranked_lists
from rankflow.dataio import FeatureTable, compute_distances


def make_blobs(sigma=0.85, seed=7, n_classes=10, per_class=100, d=16):
    """Gaussian class blobs with controlled overlap."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 1.0, size=(n_classes, d))
    feats = np.concatenate([
        centers[c] + sigma * rng.normal(0.0, 1.0, size=(per_class, d))
        for c in range(n_classes)
    ])
    labels = np.repeat(np.arange(n_classes), per_class)
    return feats, labels


def euclidean_lists(features, depth=None):
    """Full-depth ranked lists from raw features."""
    dist = compute_distances(FeatureTable(values=np.asarray(features, float)))
    return build_ranked_lists(dist, depth=depth or dist.shape[0])


def random_lists(rng, n, depth=None):
    """Ranked lists from a random symmetric-ish distance matrix."""
    dist = rng.random((n, n))
    dist = dist + dist.T
    np.fill_diagonal(dist, 0.0)
    return build_ranked_lists(dist, depth=depth or n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
