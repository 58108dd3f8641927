from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from diffres_graph import PointSet
from diffres_theory import StructuredDataset, structured_stats

from .errors import DatasetError

logger = logging.getLogger(__name__)

XOR_CENTERS = ((0.0, 0.0), (0.0, 2.0), (2.0, 0.0), (2.0, 2.0))
XOR_CLASSES = (0, 1, 1, 0)


def _disk(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    # sqrt keeps the density uniform over area
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def _ball(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    direction = rng.standard_normal((n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * (radius * rng.uniform(0.0, 1.0, n) ** (1.0 / d))[:, None]


def _two_class(a: np.ndarray, b: np.ndarray) -> PointSet:
    labels = np.repeat([0, 1], [a.shape[0], b.shape[0]])
    return PointSet(np.vstack([a, b]), labels=labels, groups=labels.copy())


def gen_xor(rng: np.random.Generator, n_per: int = 100, radius: float = 0.75) -> PointSet:
    """Four filled disks; (0,0) and (2,2) share class 0. ``groups`` holds the disk index."""
    coords, labels, groups = [], [], []
    for g, (center, label) in enumerate(zip(XOR_CENTERS, XOR_CLASSES)):
        coords.append(_disk(rng, n_per, radius) + np.asarray(center))
        labels += [label] * n_per
        groups += [g] * n_per
    return PointSet(np.vstack(coords), labels=np.array(labels), groups=np.array(groups))


def gen_moon(rng: np.random.Generator, n_per: int = 500, noise: float = 0.05) -> PointSet:
    """Upper unit arc around (0, 0) and lower unit arc around (1, 0.5)."""
    t = rng.uniform(0.0, np.pi, n_per)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    t = rng.uniform(np.pi, 2.0 * np.pi, n_per)
    lower = np.column_stack([1.0 + np.cos(t), 0.5 + np.sin(t)])
    upper += noise * rng.standard_normal(upper.shape)
    lower += noise * rng.standard_normal(lower.shape)
    return _two_class(upper, lower)


def gen_circle(rng: np.random.Generator, n_per: int = 500, noise: float = 0.05) -> PointSet:
    """Concentric circles of radius 1 (class 0) and 2 (class 1)."""
    rings = []
    for radius in (1.0, 2.0):
        t = rng.uniform(0.0, 2.0 * np.pi, n_per)
        ring = radius * np.column_stack([np.cos(t), np.sin(t)])
        rings.append(ring + noise * rng.standard_normal(ring.shape))
    return _two_class(*rings)


def gen_spiral(
    rng: np.random.Generator,
    n_per: int = 500,
    noise: float = 0.1,
    theta_range: Tuple[float, float] = (np.pi / 4.0, 4.0 * np.pi),
) -> PointSet:
    """Arms r = a + b theta with a = b = 1 and a = b = -1, theta uniform on ``theta_range``."""
    lo, hi = theta_range
    if not 0.0 <= lo < hi:
        raise DatasetError(f"theta_range must satisfy 0 <= lo < hi, got {theta_range}")
    arms = []
    for sign in (1.0, -1.0):
        theta = rng.uniform(lo, hi, n_per)
        r = sign * (1.0 + theta)
        arm = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        arms.append(arm + noise * rng.standard_normal(arm.shape))
    return _two_class(*arms)


SYNTHETIC_GENERATORS = {
    "xor": gen_xor,
    "moon": gen_moon,
    "circle": gen_circle,
    "spiral": gen_spiral,
}


def gen_structured_clusters(
    k: int,
    l: int,
    d: int,
    n_per: int,
    diameter: float,
    distance: float,
    rng: np.random.Generator,
    max_tries: int = 1000,
) -> StructuredDataset:
    """k classes of l balls each, ball diameters <= ``diameter``, set distances >= ``distance``.

    Ball centers are rejection-sampled in a cube large enough to hold all
    k*l balls; each center is redrawn up to ``max_tries`` times.
    """
    if diameter <= 0.0 or distance <= 0.0:
        raise DatasetError(f"diameter and distance must be positive, got D={diameter}, L={distance}")
    if k < 1 or l < 1 or d < 1 or n_per < 1:
        raise DatasetError(f"invalid cluster shape k={k} l={l} d={d} n_per={n_per}")
    m = k * l
    spacing = distance + diameter
    side = 2.0 * spacing * np.ceil(m ** (1.0 / d))
    centers = []
    for _ in range(m):
        for _ in range(max_tries):
            c = rng.uniform(0.0, side, d)
            if all(np.linalg.norm(c - other) > spacing for other in centers):
                centers.append(c)
                break
        else:
            raise DatasetError(f"could not place {m} clusters after {max_tries} tries", payload={"placed": len(centers)})

    subsets = tuple(_ball(rng, n_per, d, diameter / 2.0) + c for c in centers)
    tags = tuple((i, j) for i in range(k) for j in range(l))
    ds = StructuredDataset(subsets=subsets, tags=tags)
    if m > 1:
        got_d, got_l = structured_stats(ds)
        if got_d > diameter or got_l < distance:
            raise DatasetError("generated clusters miss their envelope", payload={"D": got_d, "L": got_l})
    return ds


@dataclass(frozen=True)
class FewShotFeatures:
    features_by_class: Dict[int, np.ndarray]
    subclasses_by_class: Dict[int, np.ndarray]
    base_mean: np.ndarray


def gen_fewshot_features(
    n_classes: int,
    n_sub: int,
    dim: int,
    n_per_sub: int,
    rng: np.random.Generator,
    center_scale: float = 1.0,
    sub_scale: float = 0.8,
    noise: float = 4.0,
    offset: float = 2.0,
    n_base: int = 20,
) -> FewShotFeatures:
    """Embeddings with classes made of subclasses around a shared positive offset.

    ``noise`` is the expected norm of the per-point perturbation.
    ``base_mean`` is the mean of ``n_base`` extra classes drawn the same way,
    the stand-in for the mean of base-class training features.
    """
    if min(n_classes, n_sub, dim, n_per_sub) < 1:
        raise DatasetError("all few-shot feature dimensions must be >= 1")
    shared = np.full(dim, offset)

    def draw(count: int) -> Tuple[Dict[int, np.ndarray], Dict[int, np.ndarray]]:
        feats, subs = {}, {}
        for c in range(count):
            center = shared + center_scale * rng.standard_normal(dim)
            rows, tags = [], []
            for s in range(n_sub):
                sub_center = center + sub_scale * rng.standard_normal(dim)
                rows.append(sub_center + noise * rng.standard_normal((n_per_sub, dim)) / np.sqrt(dim))
                tags += [s] * n_per_sub
            feats[c] = np.vstack(rows)
            subs[c] = np.array(tags)
        return feats, subs

    features, subclasses = draw(n_classes)
    base, _ = draw(n_base)
    base_mean = np.vstack(list(base.values())).mean(axis=0)
    return FewShotFeatures(features_by_class=features, subclasses_by_class=subclasses, base_mean=base_mean)
