from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import TheoryError
from .structured import StructuredDataset, check_parallel_separable

logger = logging.getLogger(__name__)

MAX_DIRECTION_TRIES = 100


@dataclass(frozen=True)
class FlowPiece:
    """Time interval [start, end) with one (lambda, bias) pair per hidden unit."""

    start: float
    end: float
    lambdas: np.ndarray
    biases: np.ndarray


@dataclass(frozen=True)
class FlowSchedule:
    """Piecewise-constant control x' = sum_k lambda_k relu(w*.x + b_k) beta*."""

    w_star: np.ndarray
    beta_star: np.ndarray
    pieces: Tuple[FlowPiece, ...]
    targets: Tuple[float, float]
    intervals: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None
    contained: Optional[bool] = None

    def __post_init__(self) -> None:
        if abs(float(self.w_star @ self.beta_star)) > 1e-12 * max(1.0, float(np.abs(self.beta_star).max())):
            raise TheoryError("w* and beta* must be orthogonal")
        edges = [p.start for p in self.pieces] + [self.pieces[-1].end] if self.pieces else [0.0, 1.0]
        if edges[0] != 0.0 or not np.isclose(edges[-1], 1.0) or any(
            a.end != b.start for a, b in zip(self.pieces, self.pieces[1:])
        ):
            raise TheoryError("flow pieces must partition [0, 1]")

    @property
    def width(self) -> int:
        return int(self.pieces[0].lambdas.size) if self.pieces else 0

    def separating_threshold(self) -> float:
        return 0.5 * (self.targets[0] + self.targets[1])


def beta_for(w_star: np.ndarray) -> np.ndarray:
    """All-ones direction with one pivot entry fixed so that w*.beta* = 0; first entry stays 1."""
    d = w_star.size
    if d < 2:
        raise TheoryError("the separating flow needs d >= 2")
    pivot = 1 + int(np.argmax(np.abs(w_star[1:])))
    if w_star[pivot] == 0.0:
        raise TheoryError("w* has no nonzero component beyond the first")
    beta = np.ones(d)
    others = np.delete(np.arange(d), pivot)
    beta[pivot] = -w_star[others].sum() / w_star[pivot]
    return beta


def _unit_ranges(proj: np.ndarray, units: List[np.ndarray]) -> np.ndarray:
    return np.array([[proj[u].min(), proj[u].max()] for u in units])


def _overlapping_pair(ranges: np.ndarray) -> Optional[Tuple[int, int]]:
    order = np.argsort(ranges[:, 0], kind="stable")
    for a, b in zip(order, order[1:]):
        if ranges[a, 1] >= ranges[b, 0]:
            return int(a), int(b)
    return None


def _choose_direction(
    points: np.ndarray, units: List[np.ndarray], grouped: bool, rng: np.random.Generator
) -> np.ndarray:
    d = points.shape[1]
    scale = max(1.0, float(np.abs(points).max()))
    last_pair: Optional[Tuple[int, int]] = None
    candidates: List[np.ndarray] = []
    if grouped:
        ds = StructuredDataset(subsets=tuple(points[u] for u in units), tags=tuple((0, m) for m in range(len(units))))
        witness = check_parallel_separable(ds, rng=rng)
        if witness is not None:
            # small perturbations of a witness still separate
            candidates.append(witness)
            candidates += [witness + 1e-3 * rng.standard_normal(d) for _ in range(MAX_DIRECTION_TRIES // 2)]
    for attempt in range(MAX_DIRECTION_TRIES):
        w = candidates[attempt] if attempt < len(candidates) else rng.standard_normal(d)
        w = w / np.linalg.norm(w)
        if d >= 2 and np.abs(w[1:]).max() < 1e-12:
            continue
        ranges = _unit_ranges(points @ w, units)
        pair = _overlapping_pair(ranges)
        if pair is None:
            lows = np.sort(ranges[:, 0])
            if lows.size < 2 or np.min(np.diff(lows)) > 1e-9 * scale:
                return w
        last_pair = pair
    raise TheoryError(
        f"no direction separates units {last_pair} by parallel hyperplanes",
        payload={"pair": last_pair},
    )


def construct_separating_flow(
    points: np.ndarray,
    labels: np.ndarray,
    c1: float = 0.0,
    c2: float = 1.0,
    width: int = 1,
    groups: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> FlowSchedule:
    """Build a piecewise-constant flow that moves binary-labelled data to separable positions.

    Without ``groups`` every point is its own unit and ends with first
    coordinate exactly ``c1`` (label 0) or ``c2`` (label 1). With ``groups``
    each subset moves as a unit: label-0 subsets end with their largest first
    coordinate at ``c1`` and label-1 subsets with their smallest at ``c2``.
    """
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if points.ndim != 2 or points.shape[0] < 1:
        raise TheoryError(f"expected an N x d point matrix, got {points.shape}")
    if labels.shape != (points.shape[0],) or not np.isin(labels, (0, 1)).all():
        raise TheoryError("labels must be binary 0/1, one per point")
    if not c1 < c2:
        raise TheoryError(f"targets must satisfy c1 < c2, got {c1}, {c2}")
    if width < 1:
        raise TheoryError(f"width must be >= 1, got {width}")
    rng = rng if rng is not None else np.random.default_rng(0)

    if groups is None:
        units = [np.array([i]) for i in range(points.shape[0])]
    else:
        groups = np.asarray(groups)
        units = [np.flatnonzero(groups == g) for g in np.unique(groups)]
    unit_labels = []
    for u in units:
        values = np.unique(labels[u])
        if values.size != 1:
            raise TheoryError(f"a group mixes labels {values.tolist()}")
        unit_labels.append(int(values[0]))

    w_star = _choose_direction(points, units, groups is not None, rng)
    beta_star = beta_for(w_star)
    proj = points @ w_star
    ranges = _unit_ranges(proj, units)
    order = np.argsort(ranges[:, 0], kind="stable")
    units = [units[i] for i in order]
    unit_labels = [unit_labels[i] for i in order]
    ranges = ranges[order]

    m = len(units)
    # B_1 < A_1 <= B_2 < A_2 ...: each threshold sits in the gap below its unit
    span = max(1.0, float(ranges[-1, 1] - ranges[0, 0]))
    thresholds = np.empty(m)
    thresholds[0] = ranges[0, 0] - span
    thresholds[1:] = 0.5 * (ranges[:-1, 1] + ranges[1:, 0])

    n_pieces = -(-m // width)
    tau = 1.0 / n_pieces
    pad_threshold = float(ranges[-1, 1]) + span
    targets = (c1, c2)
    current = points.copy()
    pieces: List[FlowPiece] = []
    for j in range(n_pieces):
        members = list(range(j * width, min((j + 1) * width, m)))
        lambdas = np.zeros(width)
        biases = np.full(width, -pad_threshold)
        moved = np.zeros(points.shape[0])
        for k, unit in enumerate(members):
            idx = units[unit]
            rate = tau * (proj[idx] - thresholds[unit])
            need = (targets[unit_labels[unit]] - current[idx, 0] - moved[idx]) / rate
            lam = need.min() if unit_labels[unit] == 0 else need.max()
            lambdas[k] = lam
            biases[k] = -thresholds[unit]
            moved += tau * lam * np.maximum(proj - thresholds[unit], 0.0)
        current = current + moved[:, None] * beta_star[None, :]
        pieces.append(FlowPiece(start=j * tau, end=1.0 if j == n_pieces - 1 else (j + 1) * tau, lambdas=lambdas, biases=biases))

    intervals = None
    contained = None
    if groups is not None:
        spread = float(max((np.ptp(points[u], axis=0).max() if len(u) > 1 else 0.0) for u in units))
        intervals = ((c1 - 2.0 * spread, c1), (c2, c2 + 2.0 * spread))
        final = current[:, 0]
        contained = all(
            intervals[y][0] - 1e-9 <= final[u].min() and final[u].max() <= intervals[y][1] + 1e-9
            for u, y in zip(units, unit_labels)
        )
        if not contained:
            logger.info("some groups overflow their target intervals; separation still holds")

    return FlowSchedule(
        w_star=w_star,
        beta_star=beta_star,
        pieces=tuple(pieces),
        targets=targets,
        intervals=intervals,
        contained=contained,
    )


def apply_flow(points: np.ndarray, schedule: FlowSchedule) -> np.ndarray:
    """Integrate the schedule exactly: w*.x is invariant, so each piece has a constant velocity."""
    x = np.asarray(points, dtype=float).copy()
    proj = x @ schedule.w_star
    for piece in schedule.pieces:
        speed = np.maximum(proj[:, None] + piece.biases[None, :], 0.0) @ piece.lambdas
        x += (piece.end - piece.start) * speed[:, None] * schedule.beta_star[None, :]
    return x


def flow_summary(schedule: FlowSchedule) -> Dict[str, object]:
    return {
        "pieces": len(schedule.pieces),
        "width": schedule.width,
        "targets": list(schedule.targets),
        "contained": schedule.contained,
    }
