from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .errors import FlowError
from .network import DiffResNetParams


@dataclass
class OptimizerState:
    """SGD hyperparameters plus one momentum buffer per parameter array."""

    lr: float
    momentum: float = 0.0
    weight_decay: float = 0.0
    buffers: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: DiffResNetParams, lr: float, momentum: float = 0.0, weight_decay: float = 0.0) -> "OptimizerState":
        return cls(
            lr=lr,
            momentum=momentum,
            weight_decay=weight_decay,
            buffers=[np.zeros_like(a) for a in params.arrays()],
        )


def sgd_step(params: DiffResNetParams, grads: DiffResNetParams, state: OptimizerState) -> DiffResNetParams:
    """v <- m v + (g + wd p); p <- p - lr v. Updates ``state.buffers`` in place."""
    current = params.arrays()
    gradients = grads.arrays()
    if not state.buffers:
        state.buffers = [np.zeros_like(a) for a in current]
    if len(state.buffers) != len(current) or any(v.shape != p.shape for v, p in zip(state.buffers, current)):
        raise FlowError("optimizer buffers do not match parameter shapes")
    if len(gradients) != len(current):
        raise FlowError("gradient arrays do not match parameter arrays")

    updated = []
    for p, g, v in zip(current, gradients, state.buffers):
        v *= state.momentum
        v += g + state.weight_decay * p
        updated.append(p - state.lr * v)
    return params.with_arrays(updated)


def multistep_lr(
    base_lr: float,
    epoch: int,
    epochs: int,
    milestones: Sequence[float] = (0.5, 0.75),
    factor: float = 0.1,
) -> float:
    """Learning rate for a 0-based ``epoch``, multiplied by ``factor`` at each milestone fraction of ``epochs``."""
    passed = sum(1 for m in milestones if epoch >= int(round(m * epochs)))
    return base_lr * factor**passed
