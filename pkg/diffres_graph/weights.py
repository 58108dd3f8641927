from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sparse
from scipy.sparse import csgraph
from scipy.spatial.distance import cdist

from .errors import GraphError
from .points import PointSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FixedSigma:
    value: float

    def __post_init__(self) -> None:
        if not self.value > 0:
            raise GraphError(f"fixed sigma must be > 0, got {self.value}")


@dataclass(frozen=True)
class AdaptiveSigma:
    """sigma_i is the distance from x_i to its k-th closest other point."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise GraphError(f"adaptive sigma needs k >= 1, got {self.k}")


SigmaRule = Union[FixedSigma, AdaptiveSigma]


@dataclass(frozen=True)
class SparseWeights:
    """Nonnegative N x N similarity matrix held in CSR form."""

    matrix: sparse.csr_matrix

    def __post_init__(self) -> None:
        m = sparse.csr_matrix(self.matrix, dtype=float)
        if m.shape[0] != m.shape[1]:
            raise GraphError(f"weight matrix must be square, got {m.shape}")
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        if m.nnz and (m.data.min() < 0 or not np.all(np.isfinite(m.data))):
            raise GraphError("weights must be finite and nonnegative")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseWeights":
        return cls(sparse.csr_matrix(np.asarray(dense, dtype=float)))

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def rows(self) -> Iterator[List[Tuple[int, float]]]:
        """Yield each row as sorted ``(column, weight)`` pairs."""
        m = self.matrix
        for i in range(self.n):
            start, stop = m.indptr[i], m.indptr[i + 1]
            yield [(int(j), float(w)) for j, w in zip(m.indices[start:stop], m.data[start:stop])]

    def is_symmetric(self, tol: float = 0.0) -> bool:
        diff = self.matrix - self.matrix.T
        if diff.nnz == 0:
            return True
        return bool(np.abs(diff.data).max() <= tol)

    def has_zero_diagonal(self) -> bool:
        return not np.any(self.matrix.diagonal())

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def to_triples(self) -> List[Tuple[int, int, float]]:
        coo = self.matrix.tocoo()
        return [(int(i), int(j), float(w)) for i, j, w in zip(coo.row, coo.col, coo.data)]


def gaussian_kernel(points: PointSet, sigma: SigmaRule) -> np.ndarray:
    """Dense kernel W[i, j] = exp(-|x_i - x_j|^2 / sigma_i^2), diagonal 1."""
    n = points.n
    if n < 2:
        raise GraphError("gaussian_kernel needs at least 2 points")
    sq = cdist(points.coords, points.coords, metric="sqeuclidean")

    if isinstance(sigma, FixedSigma):
        bandwidth_sq = np.full(n, sigma.value**2)
    elif isinstance(sigma, AdaptiveSigma):
        if sigma.k >= n:
            raise GraphError(f"adaptive sigma needs k < N, got k={sigma.k}, N={n}")
        others = sq.copy()
        np.fill_diagonal(others, np.inf)
        bandwidth_sq = np.partition(others, sigma.k - 1, axis=1)[:, sigma.k - 1]
        degenerate = np.flatnonzero(bandwidth_sq <= 0.0)
        if degenerate.size:
            raise GraphError("degenerate adaptive bandwidth", payload={"rows": degenerate.tolist()})
    else:
        raise GraphError(f"unknown sigma rule {sigma!r}")

    w = np.exp(-sq / bandwidth_sq[:, None])
    np.fill_diagonal(w, 1.0)
    return w


def sparsify_topk(dense: np.ndarray, n_top: int) -> SparseWeights:
    """Keep the n_top largest off-diagonal entries of each row.

    Ties go to the smaller column index. The result is not symmetric in
    general.
    """
    dense = np.asarray(dense, dtype=float)
    n = dense.shape[0]
    if dense.ndim != 2 or dense.shape[1] != n:
        raise GraphError(f"sparsify_topk needs a square matrix, got {dense.shape}")
    if not 1 <= n_top < n:
        raise GraphError(f"n_top must satisfy 1 <= n_top < N, got n_top={n_top}, N={n}")

    ranked = -dense
    np.fill_diagonal(ranked, np.inf)
    # stable sort keeps equal weights in column order
    cols = np.argsort(ranked, axis=1, kind="stable")[:, :n_top]
    rows = np.repeat(np.arange(n), n_top)
    cols = cols.ravel()
    m = sparse.csr_matrix((dense[rows, cols], (rows, cols)), shape=(n, n))
    return SparseWeights(m)


def symmetrize(weights: SparseWeights) -> SparseWeights:
    """w_ij <- max(w_ij, w_ji)."""
    return SparseWeights(weights.matrix.maximum(weights.matrix.T))


def normalize_symmetric(weights: SparseWeights, allow_isolated: bool = False) -> SparseWeights:
    """D^{-1/2} W D^{-1/2}; isolated rows stay zero only when allowed."""
    deg = weights.degrees
    isolated = np.flatnonzero(deg <= 0.0)
    if isolated.size and not allow_isolated:
        raise GraphError("isolated vertex, cannot normalize", payload={"rows": isolated.tolist()})
    scale = np.zeros_like(deg)
    scale[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    coo = weights.matrix.tocoo()
    # scale_i * scale_j is commutative, so symmetric input stays exactly symmetric
    data = coo.data * (scale[coo.row] * scale[coo.col])
    return SparseWeights(sparse.csr_matrix((data, (coo.row, coo.col)), shape=coo.shape))


def build_weight_matrix(points: PointSet, n_top: int, sigma: SigmaRule) -> SparseWeights:
    """Kernel, zero diagonal, top-k, max-symmetrize, symmetric normalization."""
    dense = gaussian_kernel(points, sigma)
    np.fill_diagonal(dense, 0.0)
    weights = normalize_symmetric(symmetrize(sparsify_topk(dense, n_top)))
    logger.debug("built weight matrix n=%d nnz=%d max_degree=%.4f", weights.n, weights.nnz, weights.degrees.max())
    return weights


def graph_laplacian(weights: SparseWeights, tol: float = 1e-12) -> sparse.csr_matrix:
    """L = Lambda - W for a symmetric W."""
    if not weights.is_symmetric(tol):
        raise GraphError("graph_laplacian needs a symmetric weight matrix")
    return (sparse.diags(weights.degrees) - weights.matrix).tocsr()


def connected_components(weights: SparseWeights) -> np.ndarray:
    """Component id per node, traversing nonzero weights."""
    _, labels = csgraph.connected_components(weights.matrix, directed=False)
    return labels


def batch_weights(weights: SparseWeights, index: np.ndarray) -> SparseWeights:
    """Restrict W to a batch and re-normalize it symmetrically.

    Rows whose neighbors all fall outside the batch keep zero degree.
    """
    index = np.asarray(index)
    sub = SparseWeights(weights.matrix[index][:, index])
    return normalize_symmetric(sub, allow_isolated=True)


def write_weights_csv(weights: SparseWeights, path: Union[str, Path], header_comment: Optional[str] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        if header_comment:
            f.write(f"# {header_comment}\n")
        writer = csv.writer(f)
        writer.writerow(["i", "j", "w"])
        for i, j, w in weights.to_triples():
            writer.writerow([i, j, repr(w)])


def read_weights_csv(path: Union[str, Path], n: Optional[int] = None) -> SparseWeights:
    path = Path(path)
    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(line for line in f if not line.startswith("#"))
        next(reader, None)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append(int(row[0]))
                cols.append(int(row[1]))
                vals.append(float(row[2]))
            except (IndexError, ValueError) as exc:
                raise GraphError(f"{path}:{line_no}: malformed triple {row!r}") from exc
    size = n if n is not None else (max(max(rows), max(cols)) + 1 if rows else 0)
    return SparseWeights(sparse.csr_matrix((vals, (rows, cols)), shape=(size, size)))
