from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from diffres_graph import FixedSigma, PointSet, SparseWeights, build_weight_matrix  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size reproduction runs (deselect with -m 'not slow')")


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def cloud(rng):
    """30 random planar points, labeled by the sign of x."""
    coords = rng.standard_normal((30, 2))
    labels = (coords[:, 0] > 0).astype(int)
    return PointSet(coords, labels=labels)


@pytest.fixture
def cloud_weights(cloud):
    return build_weight_matrix(cloud, n_top=5, sigma=FixedSigma(1.0))


@pytest.fixture
def two_node():
    """Single unit edge: degrees 1, Laplacian eigenvalues 0 and 2."""
    return SparseWeights.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))


@pytest.fixture
def make_weights():
    def _make(seed: int, n: int, n_top: int = 5) -> SparseWeights:
        r = np.random.default_rng(seed)
        return build_weight_matrix(PointSet(r.standard_normal((n, 2))), n_top=min(n_top, n - 1), sigma=FixedSigma(1.0))

    return _make
