from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Type

from pydantic import BaseModel, ValidationError

from diffres_cli import (
    CLAIMS,
    BuildGraphConfig,
    ConfigError,
    DiffuseConfig,
    FewShotConfig,
    Settings,
    TrainGraphConfig,
    TrainSyntheticConfig,
    VerifyConfig,
    cmd_build_graph,
    cmd_diffuse,
    cmd_fewshot,
    cmd_train_graph,
    cmd_train_synthetic,
    cmd_verify,
    load_config,
)
from diffres_datasets import DatasetError
from diffres_diffusion import DiffusionError
from diffres_fewshot import FewShotError
from diffres_flow import FlowError
from diffres_graph import GraphError
from diffres_theory import TheoryError

EXIT_ERROR = 1

PACKAGE_ERRORS = (ConfigError, DatasetError, DiffusionError, FewShotError, FlowError, GraphError, TheoryError)

COMMANDS: Dict[str, Tuple[Type[BaseModel], Callable[[BaseModel, Path], int]]] = {
    "train-synthetic": (TrainSyntheticConfig, cmd_train_synthetic),
    "train-graph": (TrainGraphConfig, cmd_train_graph),
    "fewshot": (FewShotConfig, cmd_fewshot),
    "verify": (VerifyConfig, cmd_verify),
    "build-graph": (BuildGraphConfig, cmd_build_graph),
    "diffuse": (DiffuseConfig, cmd_diffuse),
}


def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="diffres", description="Diffusion residual networks: training and theory checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (default: $DIFFRES_OUTPUT_DIR/<command> or runs/<command>)")
        if name in ("train-synthetic", "train-graph", "fewshot", "diffuse"):
            p.add_argument("--no-diffusion", action="store_true", help="set the diffusion step count to 0")
        if name == "verify":
            p.add_argument("--claim", action="append", choices=CLAIMS, help="restrict to one claim (repeatable)")
    return parser.parse_args(argv)


def _apply_overrides(cfg: BaseModel, args: argparse.Namespace) -> BaseModel:
    """Fold --seed, --no-diffusion and --claim into the config so its hash covers them."""
    data = cfg.model_dump()
    if args.seed is not None and "seed" in data:
        data["seed"] = args.seed
    if getattr(args, "no_diffusion", False):
        section = "episode" if isinstance(cfg, FewShotConfig) else "diffusion"
        data[section]["steps"] = 0
    if getattr(args, "claim", None):
        data["claims"] = list(dict.fromkeys(args.claim))
    return type(cfg).model_validate(data)


def main(argv: Optional[List[str]] = None) -> int:
    args = _parse_args(argv)
    settings = Settings()
    logging.basicConfig(level=settings.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    model, command = COMMANDS[args.command]
    try:
        cfg = _apply_overrides(load_config(args.config, model), args)
        out_dir = settings.resolve_output_dir(args.out, args.command)
        return command(cfg, out_dir)
    except ValidationError as exc:
        print(f"error: invalid {args.command} config: {exc.error_count()} problem(s)", file=sys.stderr)
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"])
            print(f"  {loc}: {err['msg']}", file=sys.stderr)
        return EXIT_ERROR
    except PACKAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
