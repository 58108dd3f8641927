from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from diffres_diffusion import DiffusionConfig, check_stability, diffusion_backward, diffusion_step
from diffres_graph import SparseWeights

from .errors import FlowError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Affine:
    """y = x @ weight.T + bias, with weight shaped (out, in)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        weight = np.asarray(self.weight, dtype=float)
        bias = np.asarray(self.bias, dtype=float)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise FlowError(f"affine shapes do not line up: weight {weight.shape}, bias {bias.shape}")
        if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
            raise FlowError("affine parameters must be finite")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weight.T + self.bias


@dataclass(frozen=True)
class ResidualBlockParams:
    fc1: Affine
    fc2: Optional[Affine] = None

    def __post_init__(self) -> None:
        if self.fc1.in_dim != self.fc1.out_dim:
            raise FlowError(f"fc1 must map d -> d, got {self.fc1.weight.shape}")
        if self.fc2 is not None and self.fc2.weight.shape != self.fc1.weight.shape:
            raise FlowError(f"fc2 shape {self.fc2.weight.shape} does not match fc1 {self.fc1.weight.shape}")

    @property
    def dim(self) -> int:
        return self.fc1.in_dim


@dataclass(frozen=True)
class DiffResNetParams:
    """s residual blocks followed by a linear classifier."""

    blocks: Tuple[ResidualBlockParams, ...]
    classifier: Affine
    use_fc2: bool = True
    dropout_rate: float = 0.0

    def __post_init__(self) -> None:
        blocks = tuple(self.blocks)
        if not blocks:
            raise FlowError("a network needs at least one residual block")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise FlowError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        dim = blocks[0].dim
        for i, block in enumerate(blocks):
            if block.dim != dim:
                raise FlowError(f"block {i} has dimension {block.dim}, expected {dim}")
            if (block.fc2 is not None) != self.use_fc2:
                raise FlowError(f"block {i} fc2 presence does not match use_fc2={self.use_fc2}")
        if self.classifier.in_dim != dim:
            raise FlowError(f"classifier expects {self.classifier.in_dim} inputs, blocks produce {dim}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def dim(self) -> int:
        return self.blocks[0].dim

    @property
    def n_classes(self) -> int:
        return self.classifier.out_dim

    @property
    def n_parameters(self) -> int:
        return int(sum(a.size for a in self.arrays()))

    def names(self) -> List[str]:
        out: List[str] = []
        for i in range(len(self.blocks)):
            out += [f"blocks.{i}.fc1.weight", f"blocks.{i}.fc1.bias"]
            if self.use_fc2:
                out += [f"blocks.{i}.fc2.weight", f"blocks.{i}.fc2.bias"]
        return out + ["classifier.weight", "classifier.bias"]

    def arrays(self) -> List[np.ndarray]:
        """Parameter arrays in the order given by ``names``."""
        out: List[np.ndarray] = []
        for block in self.blocks:
            out += [block.fc1.weight, block.fc1.bias]
            if block.fc2 is not None:
                out += [block.fc2.weight, block.fc2.bias]
        return out + [self.classifier.weight, self.classifier.bias]

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "DiffResNetParams":
        arrays = list(arrays)
        expected = self.arrays()
        if len(arrays) != len(expected):
            raise FlowError(f"expected {len(expected)} arrays, got {len(arrays)}")
        for name, old, new in zip(self.names(), expected, arrays):
            if np.shape(new) != old.shape:
                raise FlowError(f"{name}: shape {np.shape(new)} does not match {old.shape}")
        it = iter(arrays)
        blocks = []
        for _ in self.blocks:
            fc1 = Affine(next(it), next(it))
            fc2 = Affine(next(it), next(it)) if self.use_fc2 else None
            blocks.append(ResidualBlockParams(fc1=fc1, fc2=fc2))
        return replace(self, blocks=tuple(blocks), classifier=Affine(next(it), next(it)))

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, flat: np.ndarray) -> "DiffResNetParams":
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_parameters:
            raise FlowError(f"expected {self.n_parameters} values, got {flat.size}")
        arrays = []
        offset = 0
        for a in self.arrays():
            arrays.append(flat[offset : offset + a.size].reshape(a.shape))
            offset += a.size
        return self.with_arrays(arrays)


def _uniform_affine(in_dim: int, out_dim: int, rng: np.random.Generator) -> Affine:
    bound = 1.0 / np.sqrt(in_dim)
    return Affine(rng.uniform(-bound, bound, size=(out_dim, in_dim)), rng.uniform(-bound, bound, size=out_dim))


def init_params(
    dim: int,
    n_classes: int,
    rng: np.random.Generator,
    blocks: int = 1,
    use_fc2: bool = True,
    dropout_rate: float = 0.0,
) -> DiffResNetParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization of every affine map."""
    if dim < 1 or n_classes < 1 or blocks < 1:
        raise FlowError(f"invalid architecture dim={dim} n_classes={n_classes} blocks={blocks}")
    block_params = []
    for _ in range(blocks):
        fc1 = _uniform_affine(dim, dim, rng)
        fc2 = _uniform_affine(dim, dim, rng) if use_fc2 else None
        block_params.append(ResidualBlockParams(fc1=fc1, fc2=fc2))
    return DiffResNetParams(
        blocks=tuple(block_params),
        classifier=_uniform_affine(dim, n_classes, rng),
        use_fc2=use_fc2,
        dropout_rate=dropout_rate,
    )


def convection_forward(x: np.ndarray, block: ResidualBlockParams) -> np.ndarray:
    """X + FC2(ReLU(FC1(X))), or X + ReLU(FC1(X)) without fc2."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != block.dim:
        raise FlowError(f"input of shape {x.shape} does not match block dimension {block.dim}")
    update = np.maximum(block.fc1(x), 0.0)
    if block.fc2 is not None:
        update = block.fc2(update)
    return x + update


@dataclass
class ForwardCache:
    inputs: List[np.ndarray] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)
    masks: List[List[np.ndarray]] = field(default_factory=list)
    features: Optional[np.ndarray] = None
    logits: Optional[np.ndarray] = None
    params: Optional[DiffResNetParams] = None
    fingerprint: Optional[np.ndarray] = None
    weights: Optional[SparseWeights] = None
    diffusion: Optional[DiffusionConfig] = None
    operator: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Gradients:
    params: DiffResNetParams
    inputs: np.ndarray


def forward(
    x: np.ndarray,
    params: DiffResNetParams,
    weights: Optional[SparseWeights],
    diff_cfg: DiffusionConfig,
    rng: Optional[np.random.Generator] = None,
    train_mode: bool = False,
    operator: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, ForwardCache]:
    """Convection then r diffusion steps per block, then the classifier.

    In train mode each diffusion step is followed by inverted dropout.
    ``operator`` is the fused (I - gamma L)^r from ``diffusion_operator``; it
    replaces the step loop whenever no dropout mask is drawn.
    """
    h = np.asarray(x, dtype=float)
    if h.ndim != 2 or h.shape[1] != params.dim:
        raise FlowError(f"input of shape {h.shape} does not match network dimension {params.dim}")
    if diff_cfg.active:
        if weights is None:
            raise FlowError("diffusion is enabled but no weight matrix was given")
        if weights.n != h.shape[0]:
            raise FlowError(f"weight matrix of size {weights.n} does not match {h.shape[0]} samples")
        if diff_cfg.guard:
            check_stability(weights, diff_cfg.gamma)
    use_dropout = train_mode and params.dropout_rate > 0.0
    if use_dropout and rng is None:
        raise FlowError("train-mode dropout needs an rng")
    fused = operator if diff_cfg.active and not use_dropout else None
    if fused is not None and fused.shape != (h.shape[0], h.shape[0]):
        raise FlowError(f"diffusion operator of shape {fused.shape} does not match {h.shape[0]} samples")
    keep = 1.0 - params.dropout_rate

    cache = ForwardCache(
        params=params,
        fingerprint=params.flatten(),
        weights=weights,
        diffusion=diff_cfg,
        operator=fused,
    )
    for block in params.blocks:
        cache.inputs.append(h)
        z1 = block.fc1(h)
        cache.pre_activations.append(z1)
        update = np.maximum(z1, 0.0)
        if block.fc2 is not None:
            update = block.fc2(update)
        h = h + update

        if fused is not None:
            h = fused @ h
            cache.masks.append([])
            continue
        block_masks: List[np.ndarray] = []
        rounds = diff_cfg.steps if diff_cfg.active else 0
        for _ in range(max(rounds, 1) if use_dropout else rounds):
            if rounds:
                h = diffusion_step(h, weights, diff_cfg.gamma)
            if use_dropout:
                mask = (rng.random(h.shape) < keep) / keep
                h = h * mask
                block_masks.append(mask)
        cache.masks.append(block_masks)

    cache.features = h
    cache.logits = params.classifier(h)
    return cache.logits, cache


def backward(
    cache: ForwardCache,
    grad_logits: np.ndarray,
    params: Optional[DiffResNetParams] = None,
) -> Gradients:
    """Exact reverse pass through the classifier and every block.

    Passing ``params`` checks that they are the ones the cache was built with.
    """
    if cache.params is None or cache.logits is None or cache.features is None:
        raise FlowError("stale cache: forward was not run")
    if params is not None and (
        params.n_parameters != cache.fingerprint.size or not np.array_equal(params.flatten(), cache.fingerprint)
    ):
        raise FlowError("stale cache: parameters changed since forward")
    grad_logits = np.asarray(grad_logits, dtype=float)
    if grad_logits.shape != cache.logits.shape:
        raise FlowError(
            f"stale cache: gradient shape {grad_logits.shape} does not match logits {cache.logits.shape}"
        )

    net = cache.params
    grads: List[np.ndarray] = []
    grad_cls_w = grad_logits.T @ cache.features
    grad_cls_b = grad_logits.sum(axis=0)
    g = grad_logits @ net.classifier.weight

    diff_cfg = cache.diffusion
    rounds = diff_cfg.steps if diff_cfg is not None and diff_cfg.active else 0
    for b in reversed(range(len(net.blocks))):
        block = net.blocks[b]
        masks = cache.masks[b]
        if cache.operator is not None:
            g = cache.operator.T @ g
        n_iter = 0 if cache.operator is not None else max(len(masks), rounds)
        for step in reversed(range(n_iter)):
            if masks:
                g = g * masks[step]
            if rounds:
                g = diffusion_backward(g, cache.weights, diff_cfg.gamma)

        h_in = cache.inputs[b]
        z1 = cache.pre_activations[b]
        block_grads: List[np.ndarray] = []
        if block.fc2 is not None:
            a = np.maximum(z1, 0.0)
            grad_fc2_w = g.T @ a
            grad_fc2_b = g.sum(axis=0)
            g_a = g @ block.fc2.weight
        else:
            g_a = g
        # relu'(0) = 0
        g_z1 = g_a * (z1 > 0.0)
        block_grads += [g_z1.T @ h_in, g_z1.sum(axis=0)]
        if block.fc2 is not None:
            block_grads += [grad_fc2_w, grad_fc2_b]
        g = g + g_z1 @ block.fc1.weight
        grads = block_grads + grads

    grads += [grad_cls_w, grad_cls_b]
    return Gradients(params=net.with_arrays(grads), inputs=g)


def predict(
    x: np.ndarray,
    params: DiffResNetParams,
    weights: Optional[SparseWeights],
    diff_cfg: DiffusionConfig,
) -> np.ndarray:
    logits, _ = forward(x, params, weights, diff_cfg, train_mode=False)
    return np.argmax(logits, axis=1)
