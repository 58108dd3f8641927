from .errors import FlowError
from .losses import (
    accuracy,
    cross_entropy_loss,
    laplacian_regularizer,
    prototypical_loss,
    softmax,
    softmax_backward,
)
from .network import (
    Affine,
    DiffResNetParams,
    ForwardCache,
    Gradients,
    ResidualBlockParams,
    backward,
    convection_forward,
    forward,
    init_params,
    predict,
)
from .optim import OptimizerState, multistep_lr, sgd_step
from .serialize import load_params, params_from_dict, params_to_dict, save_params, write_trace_csv
from .trainer import EpochRecord, MetricsTrace, Regularizer, TrainConfig, train

__all__ = [
    "Affine",
    "DiffResNetParams",
    "EpochRecord",
    "FlowError",
    "ForwardCache",
    "Gradients",
    "MetricsTrace",
    "OptimizerState",
    "Regularizer",
    "ResidualBlockParams",
    "TrainConfig",
    "accuracy",
    "backward",
    "convection_forward",
    "cross_entropy_loss",
    "forward",
    "init_params",
    "laplacian_regularizer",
    "load_params",
    "multistep_lr",
    "params_from_dict",
    "params_to_dict",
    "predict",
    "prototypical_loss",
    "save_params",
    "sgd_step",
    "softmax",
    "softmax_backward",
    "train",
    "write_trace_csv",
]
