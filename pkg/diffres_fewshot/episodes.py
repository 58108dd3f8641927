from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from diffres_graph import PointSet

from .errors import FewShotError

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Episode:
    """An n-way k-shot task; support labels and hidden query labels are 0..n_way-1."""

    support: PointSet
    query: PointSet
    query_labels: np.ndarray
    classes: Tuple[int, ...]
    base_mean: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.support.labels is None:
            raise FewShotError("support set must be labeled")
        if self.support.dim != self.query.dim:
            raise FewShotError(f"support dim {self.support.dim} != query dim {self.query.dim}")
        query_labels = np.asarray(self.query_labels, dtype=int)
        if query_labels.shape != (self.query.n,):
            raise FewShotError(f"expected {self.query.n} hidden query labels, got {query_labels.shape}")
        n_way = len(self.classes)
        for name, values in (("support", self.support.labels), ("query", query_labels)):
            if values.min() < 0 or values.max() >= n_way:
                raise FewShotError(f"{name} labels must lie in 0..{n_way - 1}")
        object.__setattr__(self, "query_labels", query_labels)

    @property
    def n_way(self) -> int:
        return len(self.classes)

    @property
    def support_labels(self) -> np.ndarray:
        return self.support.labels

    def combined_coords(self) -> np.ndarray:
        """Support rows first, then query rows."""
        return np.vstack([self.support.coords, self.query.coords])


def sample_episodes(
    features_by_class: Mapping[int, np.ndarray],
    n_way: int,
    k_shot: int,
    n_query: int,
    count: int,
    rng: np.random.Generator,
    base_mean: Optional[np.ndarray] = None,
) -> List[Episode]:
    """Draw ``count`` episodes: classes, then points per class, all without replacement."""
    classes = sorted(features_by_class)
    if n_way < 1 or k_shot < 1 or n_query < 1 or count < 0:
        raise FewShotError(f"invalid episode shape n_way={n_way} k_shot={k_shot} n_query={n_query} count={count}")
    if n_way > len(classes):
        raise FewShotError(f"n_way={n_way} exceeds the {len(classes)} available classes")
    need = k_shot + n_query
    short = {c: len(features_by_class[c]) for c in classes if len(features_by_class[c]) < need}
    if short:
        raise FewShotError(f"insufficient points: classes need {need} points each", payload=short)

    episodes: List[Episode] = []
    for _ in range(count):
        chosen = rng.choice(classes, size=n_way, replace=False)
        s_rows, s_labels, q_rows, q_labels = [], [], [], []
        for label, c in enumerate(chosen):
            data = np.asarray(features_by_class[int(c)], dtype=float)
            pick = rng.choice(data.shape[0], size=need, replace=False)
            s_rows.append(data[pick[:k_shot]])
            q_rows.append(data[pick[k_shot:]])
            s_labels += [label] * k_shot
            q_labels += [label] * n_query
        episodes.append(
            Episode(
                support=PointSet(np.vstack(s_rows), labels=np.array(s_labels)),
                query=PointSet(np.vstack(q_rows)),
                query_labels=np.array(q_labels),
                classes=tuple(int(c) for c in chosen),
                base_mean=base_mean,
            )
        )
    return episodes


def read_features_csv(path: PathLike) -> Dict[int, np.ndarray]:
    """Read ``class_id,x_1..x_M`` rows into a class -> matrix mapping."""
    path = Path(path)
    rows: Dict[int, List[List[float]]] = {}
    width: Optional[int] = None
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0].strip() != "class_id":
            raise FewShotError(f"{path}: expected a header starting with class_id")
        width = len(header) - 1
        for line_no, row in enumerate(reader, start=2):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != width + 1:
                raise FewShotError(f"{path}:{line_no}: expected {width + 1} columns, got {len(row)}")
            try:
                rows.setdefault(int(row[0]), []).append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise FewShotError(f"{path}:{line_no}: {exc}") from exc
    if not rows:
        raise FewShotError(f"{path}: no feature rows")
    return {c: np.array(v) for c, v in rows.items()}


def write_features_csv(features_by_class: Mapping[int, np.ndarray], path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dim = next(iter(features_by_class.values())).shape[1]
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["class_id"] + [f"x_{i + 1}" for i in range(dim)])
        for c in sorted(features_by_class):
            for vec in features_by_class[c]:
                writer.writerow([c] + [repr(float(v)) for v in vec])


def summarize_accuracies(accuracies: Sequence[float]) -> Dict[str, float]:
    """Mean with a 95% normal-approximation half-width 1.96 * std / sqrt(n)."""
    values = np.asarray(accuracies, dtype=float)
    if values.size == 0:
        raise FewShotError("no accuracies to summarize")
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return {
        "n": int(values.size),
        "mean": float(values.mean()),
        "std": std,
        "ci95": 1.96 * std / np.sqrt(values.size),
    }


def write_episode_results(
    rows: Sequence[Tuple[int, str, float]],
    path: PathLike,
    header_comment: Optional[str] = None,
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        if header_comment:
            f.write(f"# {header_comment}\n")
        writer = csv.writer(f)
        writer.writerow(["episode_id", "method", "accuracy"])
        for episode_id, method, acc in rows:
            writer.writerow([episode_id, method, repr(float(acc))])


def write_summary_json(summary: Mapping[str, object], path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")
