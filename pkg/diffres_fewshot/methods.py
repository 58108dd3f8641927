from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import softmax as row_softmax

from diffres_diffusion import DiffusionConfig
from diffres_flow import (
    TrainConfig,
    forward,
    init_params,
    laplacian_regularizer,
    prototypical_loss,
    softmax,
    softmax_backward,
    train,
)
from diffres_graph import UNLABELED, AdaptiveSigma, PointSet, SparseWeights, build_weight_matrix

from .episodes import Episode
from .errors import FewShotError
from .transforms import Prototypes, center_normalize, class_prototypes, cross_domain_shift, rectify_prototypes

logger = logging.getLogger(__name__)


class Method(str, Enum):
    NEAREST_PROTOTYPE = "NearestPrototype"
    DIFFUSION = "Diffusion"
    CONVECTION = "Convection"
    EXTERNAL_CD = "ExternalCD"
    INTERNAL_CD = "InternalCD"


@dataclass(frozen=True)
class EpisodeConfig:
    """Settings shared by every method of one episode run.

    The two-layer network is read as ``blocks=1``: a single residual block
    whose FC1 and FC2 are the two layers, followed by the classifier.
    """

    DEFAULT_N_TOP = 8
    DEFAULT_SIGMA_K = 4

    n_top: int = DEFAULT_N_TOP
    sigma_k: int = DEFAULT_SIGMA_K
    gamma: float = 0.5
    steps: int = 10
    lam: float = 0.5
    mu: float = 0.01
    alpha: float = 0.0
    blocks: int = 1
    epochs: int = 100
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    center: bool = True
    shift: bool = True
    rectify: bool = True
    propagation_iters: int = 50
    propagation_tol: float = 1e-6
    seed: int = 0


@dataclass
class Prediction:
    labels: np.ndarray
    accuracy: float
    converged: bool = True
    iterations: int = 0
    objective: List[float] = field(default_factory=list)


def _score(pred: np.ndarray, episode: Episode) -> float:
    return float(np.mean(pred == episode.query_labels))


def nearest_prototype(episode: Episode, prototypes: Optional[Prototypes] = None) -> Prediction:
    """Closest prototype in Euclidean distance; ties go to the lowest class id."""
    if prototypes is None:
        prototypes = class_prototypes(episode.support.coords, episode.support_labels, episode.n_way)
    d = cdist(episode.query.coords, prototypes.vectors, metric="sqeuclidean")
    pred = np.argmin(d, axis=1)
    return Prediction(labels=pred, accuracy=_score(pred, episode))


def propagation_objective(y: np.ndarray, dist: np.ndarray, weights: SparseWeights, lam: float) -> float:
    """sum y.d + sum y log y - (lam/2) sum_ij w_ij y_i.y_j, minimized exactly row by row."""
    entropy = float(np.sum(y * np.log(np.clip(y, 1e-300, None))))
    coupling = float(np.sum(y * (weights.matrix @ y)))
    return float(np.sum(y * dist)) + entropy - 0.5 * lam * coupling


def laplacian_label_propagation(
    episode: Episode,
    weights: SparseWeights,
    lam: float,
    iters: int = 50,
    tol: float = 1e-6,
    prototypes: Optional[Prototypes] = None,
) -> Prediction:
    """Soft assignments y_i = softmax(-d_i + lam sum_j w_ij y_j), updated one query at a time.

    Labels are the argmax of the final logits, so lam = 0 reproduces
    nearest_prototype exactly.
    """
    if lam < 0:
        raise FewShotError(f"lambda must be >= 0, got {lam}")
    if weights.n != episode.query.n:
        raise FewShotError(f"weight matrix of size {weights.n} does not cover {episode.query.n} query points")
    if prototypes is None:
        prototypes = class_prototypes(episode.support.coords, episode.support_labels, episode.n_way)
    dist = cdist(episode.query.coords, prototypes.vectors, metric="sqeuclidean")
    logits = -dist
    y = row_softmax(logits, axis=1)
    history = [propagation_objective(y, dist, weights, lam)]

    m = weights.matrix
    converged = lam == 0.0
    iterations = 0
    while not converged and iterations < iters:
        iterations += 1
        delta = 0.0
        for i in range(y.shape[0]):
            start, stop = m.indptr[i], m.indptr[i + 1]
            logits[i] = -dist[i] + lam * (m.data[start:stop] @ y[m.indices[start:stop]])
            new = row_softmax(logits[i])
            delta = max(delta, float(np.abs(new - y[i]).max()))
            y[i] = new
        history.append(propagation_objective(y, dist, weights, lam))
        converged = delta < tol
    if not converged:
        logger.warning("label propagation did not converge in %d iterations", iters)

    pred = np.argmax(logits, axis=1)
    return Prediction(
        labels=pred,
        accuracy=_score(pred, episode),
        converged=converged,
        iterations=iterations,
        objective=history,
    )


def transform_episode(episode: Episode, cfg: EpisodeConfig) -> Episode:
    support = episode.support.coords
    query = episode.query.coords
    if cfg.center:
        support = center_normalize(support, episode.base_mean)
        query = center_normalize(query, episode.base_mean)
    if cfg.shift:
        query = cross_domain_shift(support, query)
    return Episode(
        support=episode.support.with_coords(support),
        query=episode.query.with_coords(query),
        query_labels=episode.query_labels,
        classes=episode.classes,
        base_mean=episode.base_mean,
    )


def episode_prototypes(episode: Episode, cfg: EpisodeConfig) -> Prototypes:
    prototypes = class_prototypes(episode.support.coords, episode.support_labels, episode.n_way)
    if cfg.rectify:
        prototypes = rectify_prototypes(episode.support.coords, episode.support_labels, episode.query.coords, prototypes)
    return prototypes


def _train_network(
    episode: Episode,
    cfg: EpisodeConfig,
    weights: Optional[SparseWeights],
    steps: int,
    mu: float,
    alpha: float,
    prototypes: Prototypes,
) -> np.ndarray:
    """Train on the support cross-entropy over support + query rows; return query predictions."""
    coords = episode.combined_coords()
    n_support = episode.support.n
    labels = np.concatenate([episode.support_labels, np.full(episode.query.n, UNLABELED)])
    points = PointSet(coords, labels=labels)
    train_mask = np.arange(coords.shape[0]) < n_support
    query_rows = np.flatnonzero(~train_mask)

    regularizers = []
    if mu > 0.0:

        def laplacian_term(logits: np.ndarray) -> Tuple[float, np.ndarray]:
            probs = softmax(logits)
            value, grad_probs = laplacian_regularizer(probs, weights, mu)
            return value, softmax_backward(probs, grad_probs)

        regularizers.append(laplacian_term)
    if alpha > 0.0:

        def prototypical_term(logits: np.ndarray) -> Tuple[float, np.ndarray]:
            probs = softmax(logits[query_rows])
            value, grad_probs = prototypical_loss(probs, coords[query_rows], prototypes.vectors, alpha)
            grad = np.zeros_like(logits)
            grad[query_rows] = softmax_backward(probs, grad_probs)
            return value, grad

        regularizers.append(prototypical_term)

    diffusion = DiffusionConfig(gamma=cfg.gamma, steps=steps)
    train_cfg = TrainConfig(
        diffusion=diffusion,
        epochs=cfg.epochs,
        lr=cfg.lr,
        momentum=cfg.momentum,
        weight_decay=cfg.weight_decay,
        schedule="multistep",
        seed=cfg.seed,
    )
    params0 = init_params(coords.shape[1], episode.n_way, np.random.default_rng(cfg.seed), blocks=cfg.blocks)
    params, _ = train(points, train_mask, weights, params0, train_cfg, regularizers=regularizers)
    logits, _ = forward(coords, params, weights, diffusion)
    return np.argmax(logits[query_rows], axis=1)


def run_episode(method: Method, episode: Episode, cfg: EpisodeConfig) -> Prediction:
    """Transform the episode, then classify its queries with one of the five methods."""
    method = Method(method)
    episode = transform_episode(episode, cfg)
    prototypes = episode_prototypes(episode, cfg)
    sigma = AdaptiveSigma(cfg.sigma_k)

    if method is Method.NEAREST_PROTOTYPE:
        return nearest_prototype(episode, prototypes)
    if method is Method.DIFFUSION:
        weights = build_weight_matrix(episode.query, cfg.n_top, sigma)
        return laplacian_label_propagation(
            episode, weights, cfg.lam, cfg.propagation_iters, cfg.propagation_tol, prototypes
        )

    if method is Method.CONVECTION:
        pred = _train_network(episode, cfg, None, steps=0, mu=0.0, alpha=0.0, prototypes=prototypes)
    elif method is Method.EXTERNAL_CD:
        weights = build_weight_matrix(PointSet(episode.combined_coords()), cfg.n_top, sigma)
        pred = _train_network(episode, cfg, weights, steps=0, mu=cfg.mu, alpha=0.0, prototypes=prototypes)
    else:
        # W spans support and query rows alike
        weights = build_weight_matrix(PointSet(episode.combined_coords()), cfg.n_top, sigma)
        pred = _train_network(episode, cfg, weights, steps=cfg.steps, mu=0.0, alpha=cfg.alpha, prototypes=prototypes)
    return Prediction(labels=pred, accuracy=_score(pred, episode))
