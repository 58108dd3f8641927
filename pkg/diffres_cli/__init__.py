from .commands import (
    EXIT_CLAIM_FAILED,
    EXIT_OK,
    cmd_build_graph,
    cmd_diffuse,
    cmd_fewshot,
    cmd_train_graph,
    cmd_train_synthetic,
    cmd_verify,
)
from .config import (
    CLAIMS,
    BuildGraphConfig,
    DiffuseConfig,
    FewShotConfig,
    Settings,
    TrainGraphConfig,
    TrainSyntheticConfig,
    VerifyConfig,
    config_hash,
    header_comment,
    load_config,
)
from .errors import ConfigError
from .verify import SUITES, ClaimResult, run_suites

__all__ = [
    "CLAIMS",
    "EXIT_CLAIM_FAILED",
    "EXIT_OK",
    "SUITES",
    "BuildGraphConfig",
    "ClaimResult",
    "ConfigError",
    "DiffuseConfig",
    "FewShotConfig",
    "Settings",
    "TrainGraphConfig",
    "TrainSyntheticConfig",
    "VerifyConfig",
    "cmd_build_graph",
    "cmd_diffuse",
    "cmd_fewshot",
    "cmd_train_graph",
    "cmd_train_synthetic",
    "cmd_verify",
    "config_hash",
    "header_comment",
    "load_config",
    "run_suites",
]
