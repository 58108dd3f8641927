from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import softmax

from .errors import FewShotError


def center_normalize(features: np.ndarray, base_mean: Optional[np.ndarray] = None) -> np.ndarray:
    """x <- (x - base_mean) / |x - base_mean|."""
    features = np.asarray(features, dtype=float)
    centered = features if base_mean is None else features - np.asarray(base_mean, dtype=float)
    norms = np.linalg.norm(centered, axis=1)
    zero = np.flatnonzero(norms <= np.finfo(float).tiny)
    if zero.size:
        raise FewShotError("zero vector after centering", payload={"rows": zero.tolist()})
    return centered / norms[:, None]


def cross_domain_shift(support: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Translate the query set so its mean equals the support mean."""
    support = np.asarray(support, dtype=float)
    query = np.asarray(query, dtype=float)
    if support.size == 0 or query.size == 0:
        raise FewShotError("cross_domain_shift needs nonempty support and query sets")
    return query + (support.mean(axis=0) - query.mean(axis=0))


@dataclass(frozen=True)
class Prototypes:
    means: np.ndarray
    rectified: Optional[np.ndarray] = None

    @property
    def vectors(self) -> np.ndarray:
        return self.means if self.rectified is None else self.rectified


def class_prototypes(support: np.ndarray, labels: np.ndarray, n_way: int) -> Prototypes:
    support = np.asarray(support, dtype=float)
    labels = np.asarray(labels, dtype=int)
    means = np.empty((n_way, support.shape[1]))
    for c in range(n_way):
        rows = support[labels == c]
        if rows.shape[0] == 0:
            raise FewShotError(f"empty class {c} in support set")
        means[c] = rows.mean(axis=0)
    return Prototypes(means=means)


def nearest_assignment(points: np.ndarray, prototypes: np.ndarray) -> np.ndarray:
    """Index of the closest prototype in squared distance; ties go to the lowest class."""
    return np.argmin(cdist(points, prototypes, metric="sqeuclidean"), axis=1)


def rectify_prototypes(
    support: np.ndarray,
    labels: np.ndarray,
    query: np.ndarray,
    prototypes: Prototypes,
) -> Prototypes:
    """Cosine-softmax weighted mean of each class's support and pre-classified query points.

    Query points are pre-classified once by nearest prototype.
    """
    support = np.asarray(support, dtype=float)
    labels = np.asarray(labels, dtype=int)
    query = np.asarray(query, dtype=float).reshape(-1, support.shape[1])
    means = prototypes.means
    assigned = nearest_assignment(query, means) if query.shape[0] else np.empty(0, dtype=int)

    rectified = np.empty_like(means)
    for c in range(means.shape[0]):
        members = np.vstack([support[labels == c], query[assigned == c]])
        if members.shape[0] == 0:
            raise FewShotError(f"empty class {c} during rectification")
        cos = 1.0 - cdist(members, means[c : c + 1], metric="cosine").ravel()
        if not np.all(np.isfinite(cos)):
            raise FewShotError(f"cosine similarity undefined for a zero vector in class {c}")
        rectified[c] = softmax(cos) @ members
    return Prototypes(means=means, rectified=rectified)
