from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import eigsh

from diffres_graph import SparseWeights, graph_laplacian, symmetric_eigendecomposition
from diffres_graph.spectral import MatrixLike

from .errors import DiffusionError

logger = logging.getLogger(__name__)

STABILITY_TOL = 1e-9
DENSE_OPERATOR_LIMIT = 4000


@dataclass(frozen=True)
class DiffusionConfig:
    """Step size gamma and number of explicit Euler steps r."""

    gamma: float
    steps: int
    guard: bool = True

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise DiffusionError(f"gamma must be >= 0, got {self.gamma}")
        if self.steps < 0:
            raise DiffusionError(f"steps must be >= 0, got {self.steps}")

    @property
    def active(self) -> bool:
        return self.steps > 0 and self.gamma > 0


def _check_rows(x: np.ndarray, weights: SparseWeights) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != weights.n:
        raise DiffusionError(
            f"feature matrix with {x.shape[0] if x.ndim else 0} rows does not match weights of size {weights.n}",
            payload={"x_shape": x.shape, "n": weights.n},
        )
    return x


def diffusion_step(x: np.ndarray, weights: SparseWeights, gamma: float) -> np.ndarray:
    """X' = X - gamma (Lambda - W) X."""
    x = _check_rows(x, weights)
    return x - gamma * (weights.degrees[:, None] * x - weights.matrix @ x)


def diffusion_backward(grad_out: np.ndarray, weights: SparseWeights, gamma: float) -> np.ndarray:
    """Adjoint of diffusion_step: (I - gamma (Lambda - W))^T grad."""
    grad_out = _check_rows(grad_out, weights)
    return grad_out - gamma * (weights.degrees[:, None] * grad_out - weights.matrix.T @ grad_out)


def stability_max_step(weights: SparseWeights) -> float:
    """1 / max_i d_i."""
    max_degree = float(weights.degrees.max(initial=0.0))
    return np.inf if max_degree <= 0.0 else 1.0 / max_degree


def largest_laplacian_eigenvalue(weights: SparseWeights) -> float:
    laplacian = graph_laplacian(weights)
    if weights.n <= 2:
        return float(np.linalg.eigvalsh(laplacian.toarray())[-1])
    v0 = np.linspace(1.0, 2.0, weights.n)
    value = eigsh(laplacian, k=1, which="LA", v0=v0, return_eigenvectors=False)
    return float(value[0])


def check_stability(weights: SparseWeights, gamma: float) -> None:
    """Raise DiffusionError unless rho(I - gamma L) <= 1.

    The Gershgorin bound gamma <= 1/max d_i settles most cases without an
    eigensolve; above it the largest Laplacian eigenvalue decides.
    """
    gamma_max = stability_max_step(weights)
    if gamma <= gamma_max * (1.0 + 1e-12):
        return
    lam_max = largest_laplacian_eigenvalue(weights)
    if gamma * lam_max <= 2.0 + STABILITY_TOL:
        logger.debug("gamma=%.4g above 1/max d=%.4g but spectrally stable (lambda_max=%.4g)", gamma, gamma_max, lam_max)
        return
    raise DiffusionError(
        f"unstable diffusion: gamma={gamma:.6g} exceeds 2/lambda_max={2.0 / lam_max:.6g}",
        payload={"gamma": gamma, "gamma_max": gamma_max, "lambda_max": lam_max},
    )


def diffuse(x: np.ndarray, weights: SparseWeights, cfg: DiffusionConfig) -> np.ndarray:
    """Apply ``cfg.steps`` diffusion steps."""
    x = _check_rows(x, weights)
    if not cfg.active:
        return x.copy()
    if cfg.guard:
        check_stability(weights, cfg.gamma)
    out = x
    for _ in range(cfg.steps):
        out = diffusion_step(out, weights, cfg.gamma)
    return out


def diffuse_backward(grad_out: np.ndarray, weights: SparseWeights, cfg: DiffusionConfig) -> np.ndarray:
    grad = _check_rows(grad_out, weights)
    if not cfg.active:
        return grad.copy()
    for _ in range(cfg.steps):
        grad = diffusion_backward(grad, weights, cfg.gamma)
    return grad


def spectral_radius(a: MatrixLike) -> float:
    """max |lambda_i| of a symmetric matrix."""
    return float(np.abs(symmetric_eigendecomposition(a).eigenvalues).max())


def iteration_matrix(weights: SparseWeights, gamma: float) -> sparse.csr_matrix:
    """I - gamma (Lambda - W)."""
    return (sparse.identity(weights.n, format="csr") - gamma * graph_laplacian(weights)).tocsr()


def diffusion_closed_form(x0: np.ndarray, laplacian: MatrixLike, gamma: float, t: float) -> np.ndarray:
    """X(t) = sum_i <X0, v_i> exp(-gamma lambda_i t) v_i, column-wise."""
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = x0[:, None]
    if x0.shape[0] != laplacian.shape[0]:
        raise DiffusionError(f"X0 has {x0.shape[0]} rows, Laplacian has size {laplacian.shape[0]}")
    spectrum = symmetric_eigendecomposition(laplacian)
    v = spectrum.eigenvectors
    decay = np.exp(-gamma * spectrum.eigenvalues * t)
    return v @ (decay[:, None] * (v.T @ x0))


def diffusion_operator(weights: SparseWeights, cfg: DiffusionConfig) -> np.ndarray:
    """Dense (I - gamma L)^r, the r Euler steps fused into one matrix by repeated squaring."""
    if weights.n > DENSE_OPERATOR_LIMIT:
        raise DiffusionError(
            f"graph of size {weights.n} exceeds the dense operator limit {DENSE_OPERATOR_LIMIT}",
            payload={"n": weights.n, "limit": DENSE_OPERATOR_LIMIT},
        )
    if not cfg.active:
        return np.eye(weights.n)
    if cfg.guard:
        check_stability(weights, cfg.gamma)
    step = iteration_matrix(weights, cfg.gamma).toarray()
    operator = np.linalg.matrix_power(step, cfg.steps)
    logger.debug("fused %d diffusion steps into a dense %dx%d operator", cfg.steps, weights.n, weights.n)
    return operator
