from __future__ import annotations

from typing import Tuple

import numpy as np
from scipy.special import log_softmax
from scipy.special import softmax as _softmax

from diffres_graph import SparseWeights, graph_laplacian

from .errors import FlowError


def softmax(logits: np.ndarray) -> np.ndarray:
    return _softmax(np.asarray(logits, dtype=float), axis=1)


def softmax_backward(probs: np.ndarray, grad_probs: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. softmax outputs back to the logits."""
    inner = np.sum(grad_probs * probs, axis=1, keepdims=True)
    return probs * (grad_probs - inner)


def cross_entropy_loss(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean softmax cross-entropy over the rows selected by ``mask``."""
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (logits.shape[0],) or labels.shape != (logits.shape[0],):
        raise FlowError(f"labels {labels.shape} and mask {mask.shape} must have one entry per row of {logits.shape}")
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        raise FlowError("cross_entropy_loss needs at least one labeled row")
    targets = labels[rows].astype(int)
    if targets.min() < 0 or targets.max() >= logits.shape[1]:
        raise FlowError("masked labels fall outside the class range", payload={"labels": np.unique(targets).tolist()})

    log_p = log_softmax(logits[rows], axis=1)
    loss = -float(np.mean(log_p[np.arange(rows.size), targets]))

    grad = np.zeros_like(logits)
    sub = np.exp(log_p)
    sub[np.arange(rows.size), targets] -= 1.0
    grad[rows] = sub / rows.size
    return loss, grad


def laplacian_regularizer(outputs: np.ndarray, weights: SparseWeights, mu: float) -> Tuple[float, np.ndarray]:
    """(mu/2) sum_ij w_ij |f_i - f_j|^2 = mu tr(F^T L F), gradient 2 mu L F."""
    outputs = np.asarray(outputs, dtype=float)
    if outputs.shape[0] != weights.n:
        raise FlowError(f"{outputs.shape[0]} outputs for a graph of size {weights.n}")
    lf = graph_laplacian(weights) @ outputs
    return mu * float(np.sum(outputs * lf)), 2.0 * mu * lf


def prototypical_loss(
    probs: np.ndarray,
    query_features: np.ndarray,
    prototypes: np.ndarray,
    alpha: float,
) -> Tuple[float, np.ndarray]:
    """alpha * sum_i sum_c p_ic |x_i - m_c|^2 over the query rows.

    The gradient is taken w.r.t. the probabilities only; features and
    prototypes are constants of the episode.
    """
    probs = np.asarray(probs, dtype=float)
    if alpha == 0.0:
        return 0.0, np.zeros_like(probs)
    query_features = np.asarray(query_features, dtype=float)
    prototypes = np.asarray(prototypes, dtype=float)
    if probs.shape != (query_features.shape[0], prototypes.shape[0]):
        raise FlowError(
            f"probabilities {probs.shape} do not match {query_features.shape[0]} queries x {prototypes.shape[0]} classes"
        )
    sq = ((query_features[:, None, :] - prototypes[None, :, :]) ** 2).sum(axis=2)
    return alpha * float(np.sum(probs * sq)), alpha * sq


def accuracy(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return float("nan")
    return float(np.mean(np.argmax(logits[mask], axis=1) == np.asarray(labels)[mask]))
