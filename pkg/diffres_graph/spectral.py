from __future__ import annotations

import logging
from dataclasses import dataclass
from os import getenv
from typing import Optional, Union

import numpy as np
import scipy.sparse as sparse

from .errors import GraphError
from .weights import SparseWeights, graph_laplacian

logger = logging.getLogger(__name__)

MatrixLike = Union[np.ndarray, sparse.spmatrix]

DEFAULT_SIZE_LIMIT = 500


def eigen_size_limit() -> int:
    return int(getenv("DIFFRES_EIGEN_LIMIT") or DEFAULT_SIZE_LIMIT)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def _dense_symmetric(a: MatrixLike, tol: float = 1e-10) -> np.ndarray:
    dense = a.toarray() if sparse.issparse(a) else np.asarray(a, dtype=float)
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
        raise GraphError(f"expected a square matrix, got shape {dense.shape}")
    scale = max(1.0, float(np.abs(dense).max(initial=0.0)))
    if np.abs(dense - dense.T).max(initial=0.0) > tol * scale:
        raise GraphError("matrix is not symmetric")
    return dense


def jacobi_eigendecomposition(a: MatrixLike, tol: float = 1e-12, max_sweeps: int = 50) -> SpectralDecomposition:
    """Cyclic Jacobi rotations until the off-diagonal mass is negligible."""
    work = _dense_symmetric(a).copy()
    n = work.shape[0]
    vectors = np.eye(n)
    norm = np.linalg.norm(work)
    for sweep in range(max_sweeps):
        off = np.sqrt(max(np.sum(work**2) - np.sum(np.diag(work) ** 2), 0.0))
        if off <= tol * max(norm, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (work[q, q] - work[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = work[:, p].copy()
                col_q = work[:, q].copy()
                work[:, p] = c * col_p - s * col_q
                work[:, q] = s * col_p + c * col_q
                row_p = work[p, :].copy()
                row_q = work[q, :].copy()
                work[p, :] = c * row_p - s * row_q
                work[q, :] = s * row_p + c * row_q
                work[p, q] = work[q, p] = 0.0

                vec_p = vectors[:, p].copy()
                vec_q = vectors[:, q].copy()
                vectors[:, p] = c * vec_p - s * vec_q
                vectors[:, q] = s * vec_p + c * vec_q
    else:
        logger.warning("jacobi did not converge in %d sweeps", max_sweeps)

    values = np.diag(work).copy()
    order = np.argsort(values, kind="stable")
    return SpectralDecomposition(eigenvalues=values[order], eigenvectors=vectors[:, order])


def symmetric_eigendecomposition(
    a: MatrixLike,
    size_limit: Optional[int] = None,
    method: str = "lapack",
) -> SpectralDecomposition:
    """Full eigendecomposition of a symmetric matrix up to ``size_limit`` rows.

    ``method="jacobi"`` swaps in the cyclic Jacobi solver.
    """
    limit = size_limit if size_limit is not None else eigen_size_limit()
    n = a.shape[0]
    if n > limit:
        raise GraphError(
            f"matrix of size {n} exceeds the eigensolver limit {limit}; "
            "use power_spectral_radius for large matrices",
            payload={"n": n, "limit": limit},
        )
    if method == "jacobi":
        return jacobi_eigendecomposition(a)
    if method != "lapack":
        raise GraphError(f"unknown eigensolver method {method!r}")
    values, vectors = np.linalg.eigh(_dense_symmetric(a))
    return SpectralDecomposition(eigenvalues=values, eigenvectors=vectors)


def power_spectral_radius(a: MatrixLike, iters: int = 5000, tol: float = 1e-12, seed: int = 0) -> float:
    """Largest |eigenvalue| of a symmetric matrix by power iteration."""
    n = a.shape[0]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iters):
        w = a @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(norm - estimate) <= tol * max(norm, 1.0):
            return norm
        estimate = norm
    return estimate


def zero_eigenvalue_multiplicity(weights: SparseWeights, tol: float = 1e-8) -> int:
    decomposition = symmetric_eigendecomposition(graph_laplacian(weights))
    return int(np.sum(np.abs(decomposition.eigenvalues) <= tol))


def fiedler_values(weights: SparseWeights, component_ids: np.ndarray) -> np.ndarray:
    """Second-smallest Laplacian eigenvalue of each component (0 for singletons)."""
    component_ids = np.asarray(component_ids)
    values = []
    for c in np.unique(component_ids):
        index = np.flatnonzero(component_ids == c)
        if index.size < 2:
            values.append(0.0)
            continue
        sub = SparseWeights(weights.matrix[index][:, index])
        spectrum = symmetric_eigendecomposition(graph_laplacian(sub)).eigenvalues
        values.append(float(spectrum[1]))
    return np.array(values)
