from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .errors import TheoryError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SeparabilityResult:
    """Either a hyperplane ``normal.x + offset`` positive on label 1, or a common hull point."""

    separable: bool
    normal: Optional[np.ndarray] = None
    offset: Optional[float] = None
    witness: Optional[np.ndarray] = None

    def margin(self, points: np.ndarray, labels: np.ndarray) -> float:
        """Smallest signed distance to the hyperplane; positive iff it separates."""
        if not self.separable or self.normal is None:
            return float("-inf")
        signs = np.where(np.asarray(labels) == 1, 1.0, -1.0)
        scores = (np.asarray(points, dtype=float) @ self.normal + self.offset) * signs
        return float(scores.min() / np.linalg.norm(self.normal))


def _split(points: np.ndarray, labels: np.ndarray):
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if points.ndim != 2 or labels.shape != (points.shape[0],):
        raise TheoryError(f"expected N x d points with N labels, got {points.shape} and {labels.shape}")
    if not np.isin(labels, (0, 1)).all():
        raise TheoryError("labels must be binary 0/1")
    return points, labels


def _hull_intersection(neg: np.ndarray, pos: np.ndarray) -> Optional[np.ndarray]:
    """A point in conv(neg) and conv(pos), or None when the hulls are disjoint."""
    n0, n1 = neg.shape[0], pos.shape[0]
    d = neg.shape[1]
    a_eq = np.zeros((d + 2, n0 + n1))
    a_eq[:d, :n0] = neg.T
    a_eq[:d, n0:] = -pos.T
    a_eq[d, :n0] = 1.0
    a_eq[d + 1, n0:] = 1.0
    b_eq = np.zeros(d + 2)
    b_eq[d:] = 1.0
    res = linprog(np.zeros(n0 + n1), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    return neg.T @ res.x[:n0]


def linear_separability(points: np.ndarray, labels: np.ndarray) -> SeparabilityResult:
    """Decide strict linear separability of a binary-labelled point set.

    A feasibility LP y_i (w.x_i + b) >= 1 returns the hyperplane; when it is
    infeasible a second LP finds a point shared by both convex hulls.
    """
    points, labels = _split(points, labels)
    neg, pos = points[labels == 0], points[labels == 1]
    d = points.shape[1]
    if neg.shape[0] == 0 or pos.shape[0] == 0:
        reach = float(np.abs(points[:, 0]).max()) + 1.0 if points.shape[0] else 1.0
        offset = reach if neg.shape[0] == 0 else -reach
        return SeparabilityResult(True, normal=np.eye(d)[0], offset=offset)

    signs = np.where(labels == 1, 1.0, -1.0)
    a_ub = -signs[:, None] * np.hstack([points, np.ones((points.shape[0], 1))])
    res = linprog(np.zeros(d + 1), A_ub=a_ub, b_ub=-np.ones(points.shape[0]), bounds=(None, None), method="highs")
    if res.status == 0:
        result = SeparabilityResult(True, normal=res.x[:d], offset=float(res.x[d]))
        if result.margin(points, labels) > 0.0:
            return result
        logger.debug("LP hyperplane failed the certificate check; falling back to the hull test")

    witness = _hull_intersection(neg, pos)
    if witness is None:
        raise TheoryError("separability LPs disagree: no hyperplane and no common hull point", payload={"status": res.status})
    return SeparabilityResult(False, witness=witness)
