from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist, pdist

from diffres_graph import PointSet

from .errors import TheoryError

logger = logging.getLogger(__name__)

DEFAULT_DIRECTIONS = 10_000
_CHUNK = 2048


@dataclass(frozen=True)
class StructuredDataset:
    """M subsets S_{i,j}, each tagged with (class i, subclass j).

    Empty subsets are kept as (0, d) placeholders. Rows of ``coords`` are the
    subsets stacked in order.
    """

    subsets: Tuple[np.ndarray, ...]
    tags: Tuple[Tuple[int, int], ...]

    def __post_init__(self) -> None:
        subsets = tuple(np.asarray(s, dtype=float).reshape(-1, np.shape(s)[-1]) for s in self.subsets)
        if not subsets:
            raise TheoryError("a structured dataset needs at least one subset")
        if len(self.tags) != len(subsets):
            raise TheoryError(f"{len(subsets)} subsets but {len(self.tags)} tags")
        dims = {s.shape[1] for s in subsets}
        if len(dims) != 1:
            raise TheoryError(f"subsets disagree on dimension: {sorted(dims)}")
        seen = {}
        for m, s in enumerate(subsets):
            for row in map(tuple, s):
                if row in seen and seen[row] != m:
                    raise TheoryError(
                        f"subsets {seen[row]} and {m} share the point {row}", payload={"subsets": (seen[row], m)}
                    )
                seen[row] = m
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "tags", tuple((int(i), int(j)) for i, j in self.tags))

    @classmethod
    def from_points(cls, points: PointSet) -> "StructuredDataset":
        """Subsets from ``points.groups``, classes from ``points.labels``."""
        if points.groups is None or points.labels is None:
            raise TheoryError("points need both labels and groups to form a structured dataset")
        subsets, tags = [], []
        for g in np.unique(points.groups):
            rows = points.groups == g
            classes = np.unique(points.labels[rows])
            if classes.size != 1:
                raise TheoryError(f"group {g} mixes classes {classes.tolist()}")
            subsets.append(points.coords[rows])
            tags.append((int(classes[0]), int(g)))
        return cls(subsets=tuple(subsets), tags=tuple(tags))

    @property
    def dim(self) -> int:
        return int(self.subsets[0].shape[1])

    @property
    def m(self) -> int:
        return len(self.subsets)

    @property
    def coords(self) -> np.ndarray:
        return np.vstack(self.subsets)

    @property
    def group_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.m), [s.shape[0] for s in self.subsets])

    @property
    def labels(self) -> np.ndarray:
        return np.repeat([t[0] for t in self.tags], [s.shape[0] for s in self.subsets])

    def with_coords(self, coords: np.ndarray) -> "StructuredDataset":
        sizes = np.cumsum([s.shape[0] for s in self.subsets])[:-1]
        return StructuredDataset(subsets=tuple(np.split(np.asarray(coords, dtype=float), sizes)), tags=self.tags)


def _diameter_and_distance(parts: Sequence[np.ndarray], squared: bool) -> Tuple[float, float]:
    metric = "sqeuclidean" if squared else "euclidean"
    nonempty = [p for p in parts if p.shape[0]]
    if len(nonempty) < 2:
        raise TheoryError("L is undefined with fewer than two nonempty subsets")
    diameter = max((float(pdist(p, metric=metric).max()) if p.shape[0] > 1 else 0.0) for p in nonempty)
    distance = min(float(cdist(a, b, metric=metric).min()) for a, b in combinations(nonempty, 2))
    return diameter, distance


def structured_stats(ds: StructuredDataset, squared: bool = False) -> Tuple[float, float]:
    """(D, L): largest subset diameter and smallest distance between two subsets.

    Distances are Euclidean; ``squared=True`` switches to squared norms.
    """
    return _diameter_and_distance(ds.subsets, squared)


def theorem2_threshold(m: int, d: int) -> float:
    """M(M-1) sqrt(pi) d / 4, the L/D ratio that guarantees parallel separability."""
    if m < 2 or d < 1:
        raise TheoryError(f"threshold needs M >= 2 and d >= 1, got M={m}, d={d}")
    return m * (m - 1) * np.sqrt(np.pi) * d / 4.0


def _disjoint_directions(directions: np.ndarray, parts: Sequence[np.ndarray]) -> np.ndarray:
    """Boolean per direction: do the projected subset intervals pairwise not overlap."""
    lows, highs = [], []
    for p in parts:
        proj = directions @ p.T
        lows.append(proj.min(axis=1))
        highs.append(proj.max(axis=1))
    lows = np.stack(lows, axis=1)
    highs = np.stack(highs, axis=1)
    order = np.argsort(lows, axis=1)
    lows = np.take_along_axis(lows, order, axis=1)
    highs = np.take_along_axis(highs, order, axis=1)
    return np.all(highs[:, :-1] < lows[:, 1:], axis=1)


def _first_witness(directions: np.ndarray, parts: Sequence[np.ndarray]) -> Optional[np.ndarray]:
    for start in range(0, directions.shape[0], _CHUNK):
        chunk = directions[start : start + _CHUNK]
        hits = np.flatnonzero(_disjoint_directions(chunk, parts))
        if hits.size:
            return chunk[hits[0]].copy()
    return None


def critical_directions_2d(parts: Sequence[np.ndarray]) -> np.ndarray:
    """One unit direction inside every open arc of [0, pi) between cross-subset critical angles.

    Along an arc the relative order of points from different subsets cannot
    change, so testing one direction per arc decides separability exactly.
    """
    angles: List[np.ndarray] = []
    for a, b in combinations(parts, 2):
        delta = (a[:, None, :] - b[None, :, :]).reshape(-1, 2)
        if np.any(np.all(delta == 0.0, axis=1)):
            return np.empty((0, 2))
        angles.append(np.mod(np.arctan2(delta[:, 1], delta[:, 0]) + np.pi / 2.0, np.pi))
    if not angles:
        return np.array([[1.0, 0.0]])
    crit = np.unique(np.concatenate(angles))
    mids = (crit + np.append(crit[1:], crit[0] + np.pi)) / 2.0
    return np.column_stack([np.cos(mids), np.sin(mids)])


def check_parallel_separable(
    ds: StructuredDataset,
    n_directions: int = DEFAULT_DIRECTIONS,
    rng: Optional[np.random.Generator] = None,
) -> Optional[np.ndarray]:
    """A unit direction whose subset projections are pairwise disjoint, or None.

    Exact in d = 2 (angular sweep). In other dimensions the coordinate axes and
    ``n_directions`` random directions are tried, so None means not found.
    """
    parts = [s for s in ds.subsets if s.shape[0]]
    d = ds.dim
    if len(parts) < 2:
        return np.eye(d)[0]
    if d == 2:
        return _first_witness(critical_directions_2d(parts), parts)

    rng = rng if rng is not None else np.random.default_rng(0)
    witness = _first_witness(np.eye(d), parts)
    if witness is not None or d == 1:
        return witness
    directions = rng.standard_normal((n_directions, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    witness = _first_witness(directions, parts)
    if witness is None:
        logger.info("no separating direction among %d random samples in d=%d", n_directions, d)
    return witness
