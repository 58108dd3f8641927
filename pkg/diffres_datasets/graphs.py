from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sparse
from scipy.sparse import csgraph

from diffres_graph import PointSet, SparseWeights, normalize_symmetric

from .errors import DatasetError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

EDGES_FILE = "edges.txt"
FEATURES_FILE = "features.csv"
LABELS_FILE = "labels.csv"

SBM_FEATURE_KINDS = ("gaussian", "binary")


@dataclass(frozen=True)
class GraphSplit:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def masks(self, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        out = []
        for index in (self.train, self.val, self.test):
            mask = np.zeros(n, dtype=bool)
            mask[index] = True
            out.append(mask)
        return out[0], out[1], out[2]


@dataclass(frozen=True)
class GraphDataset:
    """Largest connected component of an undirected graph, ready for diffusion.

    ``adjacency`` is D^{-1/2} (A + I) D^{-1/2}; ``features`` are row-normalized
    copies of ``raw_features``. ``edges`` lists each undirected edge once
    (i < j) in the relabeled node ids; ``node_ids`` maps them back to the input.
    """

    adjacency: SparseWeights
    features: np.ndarray
    labels: np.ndarray
    edges: np.ndarray
    raw_features: np.ndarray
    node_ids: np.ndarray
    split: Optional[GraphSplit] = None

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    def points(self) -> PointSet:
        return PointSet(self.features, labels=self.labels)


def row_normalize(features: np.ndarray) -> np.ndarray:
    """Divide each row by its sum; all-zero rows stay zero."""
    features = np.asarray(features, dtype=float)
    sums = features.sum(axis=1)
    zero = np.flatnonzero(sums == 0.0)
    if zero.size:
        logger.warning("%d feature rows sum to zero and stay unnormalized", zero.size)
    scale = np.zeros_like(sums)
    scale[sums != 0.0] = 1.0 / sums[sums != 0.0]
    return features * scale[:, None]


def preprocess_graph(
    n: int,
    edges: np.ndarray,
    raw_features: np.ndarray,
    labels: np.ndarray,
    node_ids: Optional[np.ndarray] = None,
) -> GraphDataset:
    """Undirected closure, largest component, self-loops, symmetric normalization."""
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    node_ids = np.arange(n) if node_ids is None else np.asarray(node_ids)
    edges = edges[edges[:, 0] != edges[:, 1]]
    a = sparse.csr_matrix((np.ones(edges.shape[0]), (edges[:, 0], edges[:, 1])), shape=(n, n))
    a = ((a + a.T) > 0).astype(float).tocsr()

    count, comp = csgraph.connected_components(a, directed=False)
    if count > 1:
        largest = np.argmax(np.bincount(comp))
        keep = np.flatnonzero(comp == largest)
        logger.info("keeping the largest of %d components: %d of %d nodes", count, keep.size, n)
        a = a[keep][:, keep].tocsr()
    else:
        keep = np.arange(n)

    upper = sparse.triu(a, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    kept_edges = np.column_stack([upper.row[order], upper.col[order]]).astype(int)
    adjacency = normalize_symmetric(SparseWeights(a + sparse.identity(keep.size, format="csr")))
    raw = np.asarray(raw_features, dtype=float)[keep]
    return GraphDataset(
        adjacency=adjacency,
        features=row_normalize(raw),
        labels=np.asarray(labels, dtype=int)[keep],
        edges=kept_edges,
        raw_features=raw,
        node_ids=node_ids[keep],
    )


def _read_table(path: Path, kind: str) -> Tuple[List[str], List[List[str]], List[int]]:
    if not path.exists():
        raise DatasetError(f"{kind} file {path} does not exist")
    with path.open(newline="", encoding="utf-8") as f:
        numbered = [(i, line) for i, line in enumerate(f, start=1) if line.strip() and not line.startswith("#")]
    if not numbered:
        raise DatasetError(f"{path} is empty")
    rows = list(csv.reader(line for _, line in numbered))
    return rows[0], rows[1:], [i for i, _ in numbered[1:]]


def load_graph_dataset(edge_path: PathLike, feature_path: PathLike, label_path: PathLike) -> GraphDataset:
    """Read ``src dst`` edge lines, ``node,f_1..f_F`` features and ``node,label`` rows."""
    edge_path, feature_path, label_path = Path(edge_path), Path(feature_path), Path(label_path)

    header, rows, line_nos = _read_table(feature_path, "feature")
    ids: List[str] = []
    feats: List[List[float]] = []
    for row, line_no in zip(rows, line_nos):
        if len(row) != len(header):
            raise DatasetError(f"{feature_path}:{line_no}: expected {len(header)} columns, got {len(row)}")
        try:
            feats.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise DatasetError(f"{feature_path}:{line_no}: {exc}") from exc
        ids.append(row[0].strip())
    index: Dict[str, int] = {}
    for i, node in enumerate(ids):
        if node in index:
            raise DatasetError(f"{feature_path}: duplicate node id {node!r}")
        index[node] = i

    _, rows, line_nos = _read_table(label_path, "label")
    labels = np.full(len(ids), -1, dtype=int)
    for row, line_no in zip(rows, line_nos):
        try:
            node, label = row[0].strip(), int(row[1])
        except (IndexError, ValueError) as exc:
            raise DatasetError(f"{label_path}:{line_no}: malformed label row {row!r}") from exc
        if node not in index:
            raise DatasetError(f"{label_path}:{line_no}: unknown node id {node!r}")
        labels[index[node]] = label
    missing = np.flatnonzero(labels < 0)
    if missing.size:
        raise DatasetError(f"{label_path}: {missing.size} nodes have no label", payload={"nodes": [ids[i] for i in missing[:10]]})

    if not edge_path.exists():
        raise DatasetError(f"edge file {edge_path} does not exist")
    edges: List[Tuple[int, int]] = []
    with edge_path.open(encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 2:
                raise DatasetError(f"{edge_path}:{line_no}: expected 'src dst', got {line.strip()!r}")
            try:
                edges.append((index[parts[0]], index[parts[1]]))
            except KeyError as exc:
                raise DatasetError(f"{edge_path}:{line_no}: unknown node id {exc.args[0]!r}") from exc

    node_ids = np.array(ids)
    ds = preprocess_graph(len(ids), np.array(edges, dtype=int).reshape(-1, 2), np.array(feats), labels, node_ids)
    logger.info("loaded graph: %d nodes, %d edges, %d classes", ds.n, ds.n_edges, ds.n_classes)
    return ds


def save_graph_dataset(ds: GraphDataset, directory: PathLike) -> Tuple[Path, Path, Path]:
    """Write the component's edges, raw features and labels; reloading reproduces ``ds``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    edge_path, feature_path, label_path = directory / EDGES_FILE, directory / FEATURES_FILE, directory / LABELS_FILE
    names = [str(v) for v in ds.node_ids]
    with edge_path.open("w", encoding="utf-8") as f:
        for i, j in ds.edges:
            f.write(f"{names[i]} {names[j]}\n")
    with feature_path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["node"] + [f"f_{k + 1}" for k in range(ds.raw_features.shape[1])])
        for name, row in zip(names, ds.raw_features):
            writer.writerow([name] + [repr(float(v)) for v in row])
    with label_path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["node", "label"])
        for name, label in zip(names, ds.labels):
            writer.writerow([name, int(label)])
    return edge_path, feature_path, label_path


def sample_graph_split(
    labels: np.ndarray,
    rng: np.random.Generator,
    n_train: int = 20,
    n_val: int = 30,
) -> GraphSplit:
    """``n_train`` and ``n_val`` nodes per class; everything else is test."""
    labels = np.asarray(labels, dtype=int)
    need = n_train + n_val
    small = {int(c): int(k) for c, k in zip(*np.unique(labels, return_counts=True)) if k < need}
    if small:
        raise DatasetError(f"classes need at least {need} nodes for the split", payload=small)
    train, val = [], []
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        train.append(members[:n_train])
        val.append(members[n_train:need])
    train_idx = np.sort(np.concatenate(train))
    val_idx = np.sort(np.concatenate(val))
    test_idx = np.setdiff1d(np.arange(labels.size), np.concatenate([train_idx, val_idx]))
    return GraphSplit(train=train_idx, val=val_idx, test=test_idx)


def gen_sbm(
    classes: int,
    n_per: int,
    p_in: float,
    p_out: float,
    feat_dim: int,
    rng: np.random.Generator,
    feature_kind: str = "gaussian",
    signal: float = 0.3,
    noise: float = 1.0,
    word_rate: float = 0.05,
    topic_rate: float = 0.1,
) -> GraphDataset:
    """Stochastic block model with class-dependent node features.

    Each class owns a block of ``feat_dim // classes`` feature columns.
    ``"gaussian"`` features are N(mean_c, noise^2) with mean 1 off the block
    and 1 + ``signal`` on it. ``"binary"`` features are 0/1: every
    word fires with probability ``word_rate`` plus ``topic_rate`` on the block.
    """
    if not 0.0 <= p_out <= p_in <= 1.0:
        raise DatasetError(f"need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if classes < 1 or n_per < 1 or feat_dim < classes:
        raise DatasetError(f"invalid SBM shape classes={classes} n_per={n_per} feat_dim={feat_dim}")
    if feature_kind not in SBM_FEATURE_KINDS:
        raise DatasetError(f"unknown SBM feature kind {feature_kind!r}", payload={"kinds": list(SBM_FEATURE_KINDS)})
    n = classes * n_per
    labels = np.repeat(np.arange(classes), n_per)
    same = labels[:, None] == labels[None, :]
    draws = rng.uniform(0.0, 1.0, (n, n)) < np.where(same, p_in, p_out)
    i, j = np.nonzero(np.triu(draws, k=1))

    block = feat_dim // classes
    on_block = np.zeros((classes, feat_dim), dtype=bool)
    for c in range(classes):
        on_block[c, c * block : (c + 1) * block] = True
    if feature_kind == "gaussian":
        means = 1.0 + signal * on_block
        features = means[labels] + noise * rng.standard_normal((n, feat_dim))
    else:
        probs = word_rate + topic_rate * on_block
        features = (rng.uniform(0.0, 1.0, (n, feat_dim)) < probs[labels]).astype(float)
    return preprocess_graph(n, np.column_stack([i, j]), features, labels)
