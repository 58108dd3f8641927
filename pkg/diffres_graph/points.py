from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from .errors import GraphError

UNLABELED = -1


@dataclass(frozen=True)
class PointSet:
    """N x d coordinates with optional per-row class ids (-1 = unlabeled).

    ``groups`` optionally tags each row with a subclass id; generators of
    structured data fill it so theory tools can rebuild the subsets.
    """

    coords: np.ndarray
    labels: Optional[np.ndarray] = None
    groups: Optional[np.ndarray] = None
    ids: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        if coords.ndim != 2 or coords.shape[0] < 1 or coords.shape[1] < 1:
            raise GraphError(f"PointSet needs an N x d matrix with N, d >= 1, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise GraphError("PointSet coordinates must be finite")
        object.__setattr__(self, "coords", coords)

        n = coords.shape[0]
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=int)
            if labels.shape != (n,):
                raise GraphError(f"labels must have shape ({n},), got {labels.shape}")
            if np.any(labels < UNLABELED):
                raise GraphError("labels must be class ids >= 0 or -1 for unlabeled")
            object.__setattr__(self, "labels", labels)
        if self.groups is not None:
            groups = np.asarray(self.groups, dtype=int)
            if groups.shape != (n,):
                raise GraphError(f"groups must have shape ({n},), got {groups.shape}")
            object.__setattr__(self, "groups", groups)
        ids = np.arange(n) if self.ids is None else np.asarray(self.ids, dtype=int)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])

    @property
    def dim(self) -> int:
        return int(self.coords.shape[1])

    @property
    def labeled_mask(self) -> np.ndarray:
        if self.labels is None:
            return np.zeros(self.n, dtype=bool)
        return self.labels != UNLABELED

    def subset(self, index: np.ndarray) -> "PointSet":
        index = np.asarray(index)
        return PointSet(
            coords=self.coords[index],
            labels=None if self.labels is None else self.labels[index],
            groups=None if self.groups is None else self.groups[index],
            ids=self.ids[index],
        )

    def with_coords(self, coords: np.ndarray) -> "PointSet":
        return PointSet(coords=coords, labels=self.labels, groups=self.groups, ids=self.ids)


def read_points_csv(path: Union[str, Path]) -> PointSet:
    """Read ``x_1..x_d[,label]`` rows; a header row is required."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(row for row in f if not row.startswith("#"))
        try:
            header = next(reader)
        except StopIteration as exc:
            raise GraphError(f"{path} is empty") from exc
        has_label = bool(header) and header[-1].strip() == "label"
        rows: List[List[float]] = []
        labels: List[int] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise GraphError(f"{path}:{line_no}: expected {len(header)} columns, got {len(row)}")
            try:
                if has_label:
                    rows.append([float(v) for v in row[:-1]])
                    labels.append(int(row[-1]))
                else:
                    rows.append([float(v) for v in row])
            except ValueError as exc:
                raise GraphError(f"{path}:{line_no}: {exc}") from exc
    if not rows:
        raise GraphError(f"{path} contains no points")
    return PointSet(coords=np.array(rows), labels=np.array(labels) if has_label else None)


def write_points_csv(points: PointSet, path: Union[str, Path], header_comment: Optional[str] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        if header_comment:
            f.write(f"# {header_comment}\n")
        writer = csv.writer(f)
        columns = [f"x_{j + 1}" for j in range(points.dim)]
        if points.labels is not None:
            columns.append("label")
        writer.writerow(columns)
        for i in range(points.n):
            row = [repr(float(v)) for v in points.coords[i]]
            if points.labels is not None:
                row.append(str(int(points.labels[i])))
            writer.writerow(row)
