from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from diffres_diffusion import DENSE_OPERATOR_LIMIT, DiffusionConfig, check_stability, diffusion_operator
from diffres_graph import UNLABELED, PointSet, SparseWeights, batch_weights

from .errors import FlowError
from .losses import accuracy, cross_entropy_loss
from .network import DiffResNetParams, backward, forward
from .optim import OptimizerState, multistep_lr, sgd_step

logger = logging.getLogger(__name__)

# extra loss term on the full-batch logits: returns (value, grad_logits)
Regularizer = Callable[[np.ndarray], Tuple[float, np.ndarray]]

TRACE_COLUMNS = ("epoch", "loss", "train_acc", "val_acc", "test_acc")

# shorter diffusions stay on the sparse step loop
FUSE_MIN_STEPS = 32


@dataclass(frozen=True)
class TrainConfig:
    DEFAULT_EPOCHS = 30
    DEFAULT_LR = 1.0
    DEFAULT_MOMENTUM = 0.9
    DEFAULT_WEIGHT_DECAY = 5e-4

    diffusion: DiffusionConfig
    epochs: int = DEFAULT_EPOCHS
    lr: float = DEFAULT_LR
    momentum: float = DEFAULT_MOMENTUM
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    schedule: str = "constant"
    milestones: Tuple[float, ...] = (0.5, 0.75)
    lr_factor: float = 0.1
    batch_size: Optional[int] = None
    seed: int = 0
    fuse_diffusion: bool = True

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise FlowError(f"epochs must be >= 1, got {self.epochs}")
        if self.schedule not in ("constant", "multistep"):
            raise FlowError(f"unknown lr schedule {self.schedule!r}")
        if self.batch_size is not None and self.batch_size < 1:
            raise FlowError(f"batch_size must be >= 1, got {self.batch_size}")

    def lr_at(self, epoch: int) -> float:
        if self.schedule == "multistep":
            return multistep_lr(self.lr, epoch, self.epochs, self.milestones, self.lr_factor)
        return self.lr


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    train_acc: float
    val_acc: float
    test_acc: float


@dataclass
class MetricsTrace:
    records: List[EpochRecord] = field(default_factory=list)
    snapshots: Dict[int, np.ndarray] = field(default_factory=dict)

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def column(self, name: str) -> np.ndarray:
        if name not in TRACE_COLUMNS:
            raise FlowError(f"unknown trace column {name!r}")
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def last(self) -> EpochRecord:
        if not self.records:
            raise FlowError("empty trace")
        return self.records[-1]

    def best_validation(self) -> EpochRecord:
        """Earliest record with the highest validation accuracy."""
        if not self.records:
            raise FlowError("empty trace")
        val = self.column("val_acc")
        if np.all(np.isnan(val)):
            return self.last
        return self.records[int(np.nanargmax(val))]

    def first_epoch_reaching(self, column: str, threshold: float) -> Optional[int]:
        for record in self.records:
            if getattr(record, column) >= threshold:
                return record.epoch
        return None


def _mask(mask: Optional[np.ndarray], n: int, name: str) -> np.ndarray:
    if mask is None:
        return np.zeros(n, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise FlowError(f"{name} mask has shape {mask.shape}, expected ({n},)")
    return mask


def train(
    points: PointSet,
    train_mask: np.ndarray,
    weights: Optional[SparseWeights],
    params0: DiffResNetParams,
    cfg: TrainConfig,
    val_mask: Optional[np.ndarray] = None,
    test_mask: Optional[np.ndarray] = None,
    regularizers: Sequence[Regularizer] = (),
    progress_callback: Optional[Callable[[Dict[str, float]], None]] = None,
    snapshot_epochs: Iterable[int] = (),
) -> Tuple[DiffResNetParams, MetricsTrace]:
    """SGD on the cross-entropy of the ``train_mask`` rows.

    Metrics of epoch e are measured in eval mode after the e-th update;
    ``test_mask`` defaults to every labeled point. Snapshot epoch 0 holds the
    features of the initial parameters.
    """
    if points.labels is None:
        raise FlowError("training needs labels")
    n = points.n
    labels = points.labels
    train_mask = _mask(train_mask, n, "train")
    if not train_mask.any():
        raise FlowError("train mask selects no rows")
    if np.any(labels[train_mask] == UNLABELED):
        raise FlowError("train mask selects unlabeled rows")
    val_mask = _mask(val_mask, n, "validation")
    test_mask = _mask(test_mask, n, "test") if test_mask is not None else labels != UNLABELED
    if regularizers and cfg.batch_size is not None:
        raise FlowError("regularizers are only supported in full-batch mode")

    diff_cfg = cfg.diffusion
    run_cfg = diff_cfg
    if diff_cfg.active:
        if weights is None:
            raise FlowError("diffusion is enabled but no weight matrix was given")
        if diff_cfg.guard:
            check_stability(weights, diff_cfg.gamma)
        run_cfg = replace(diff_cfg, guard=False)
    operator = _fused_operator(weights, run_cfg, cfg)

    x = points.coords
    rng = np.random.default_rng(cfg.seed)
    state = OptimizerState.for_params(params0, cfg.lr, cfg.momentum, cfg.weight_decay)
    params = params0
    wanted = set(snapshot_epochs)
    trace = MetricsTrace()

    if 0 in wanted:
        _, cache = forward(x, params, weights, run_cfg, operator=operator)
        trace.snapshots[0] = cache.features

    for epoch in range(1, cfg.epochs + 1):
        state.lr = cfg.lr_at(epoch - 1)
        if cfg.batch_size is None:
            logits, cache = forward(x, params, weights, run_cfg, rng=rng, train_mode=True, operator=operator)
            loss, grad = cross_entropy_loss(logits, labels, train_mask)
            for reg in regularizers:
                value, reg_grad = reg(logits)
                loss += value
                grad = grad + reg_grad
            _check_finite(loss, epoch)
            params = sgd_step(params, backward(cache, grad).params, state)
        else:
            params, loss = _train_batches(x, labels, train_mask, weights, diff_cfg, cfg.batch_size, params, state, rng, epoch)

        logits, cache = forward(x, params, weights, run_cfg, operator=operator)
        record = EpochRecord(
            epoch=epoch,
            loss=loss,
            train_acc=accuracy(logits, labels, train_mask),
            val_acc=accuracy(logits, labels, val_mask),
            test_acc=accuracy(logits, labels, test_mask),
        )
        trace.append(record)
        if epoch in wanted:
            trace.snapshots[epoch] = cache.features
        if progress_callback is not None:
            progress_callback({**record.__dict__, "lr": state.lr})

    logger.debug("trained %d epochs, final loss %.6g", cfg.epochs, trace.last.loss)
    return params, trace


def _fused_operator(
    weights: Optional[SparseWeights], diff_cfg: DiffusionConfig, cfg: TrainConfig
) -> Optional[np.ndarray]:
    """The dense (I - gamma L)^r for full-batch runs on long diffusions, else None."""
    if not (cfg.fuse_diffusion and diff_cfg.active and cfg.batch_size is None):
        return None
    if diff_cfg.steps < FUSE_MIN_STEPS or weights.n > DENSE_OPERATOR_LIMIT:
        return None
    return diffusion_operator(weights, diff_cfg)


def _check_finite(loss: float, epoch: int) -> None:
    if not np.isfinite(loss):
        raise FlowError(f"loss became {loss} at epoch {epoch}; lower the learning rate or the diffusion step", payload={"epoch": epoch})


def _train_batches(
    x: np.ndarray,
    labels: np.ndarray,
    train_mask: np.ndarray,
    weights: Optional[SparseWeights],
    diff_cfg: DiffusionConfig,
    batch_size: int,
    params: DiffResNetParams,
    state: OptimizerState,
    rng: np.random.Generator,
    epoch: int,
) -> Tuple[DiffResNetParams, float]:
    """One epoch of mini-batches over a shuffled order; each batch diffuses on its own renormalized sub-graph."""
    order = rng.permutation(x.shape[0])
    losses: List[float] = []
    for start in range(0, order.size, batch_size):
        index = np.sort(order[start : start + batch_size])
        mask = train_mask[index]
        if not mask.any():
            continue
        sub_weights = batch_weights(weights, index) if diff_cfg.active else None
        logits, cache = forward(x[index], params, sub_weights, diff_cfg, rng=rng, train_mode=True)
        loss, grad = cross_entropy_loss(logits, labels[index], mask)
        _check_finite(loss, epoch)
        params = sgd_step(params, backward(cache, grad).params, state)
        losses.append(loss)
    return params, (float(np.mean(losses)) if losses else float("nan"))
