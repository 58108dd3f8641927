from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from .errors import FlowError
from .network import Affine, DiffResNetParams, ResidualBlockParams
from .trainer import TRACE_COLUMNS, MetricsTrace

PathLike = Union[str, Path]


def params_to_dict(params: DiffResNetParams) -> Dict[str, Any]:
    return {
        "architecture": {
            "blocks": len(params.blocks),
            "dim": params.dim,
            "n_classes": params.n_classes,
            "use_fc2": params.use_fc2,
            "dropout_rate": params.dropout_rate,
        },
        "tensors": [
            {"name": name, "shape": list(array.shape), "data": [float(v) for v in array.ravel(order="C")]}
            for name, array in zip(params.names(), params.arrays())
        ],
    }


def params_from_dict(doc: Dict[str, Any]) -> DiffResNetParams:
    try:
        arch = doc["architecture"]
        tensors = {t["name"]: np.asarray(t["data"], dtype=float).reshape(t["shape"]) for t in doc["tensors"]}
        blocks = []
        for i in range(int(arch["blocks"])):
            fc1 = Affine(tensors[f"blocks.{i}.fc1.weight"], tensors[f"blocks.{i}.fc1.bias"])
            fc2 = None
            if arch["use_fc2"]:
                fc2 = Affine(tensors[f"blocks.{i}.fc2.weight"], tensors[f"blocks.{i}.fc2.bias"])
            blocks.append(ResidualBlockParams(fc1=fc1, fc2=fc2))
        params = DiffResNetParams(
            blocks=tuple(blocks),
            classifier=Affine(tensors["classifier.weight"], tensors["classifier.bias"]),
            use_fc2=bool(arch["use_fc2"]),
            dropout_rate=float(arch["dropout_rate"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FlowError(f"malformed parameter document: {exc}") from exc
    if params.dim != int(arch["dim"]) or params.n_classes != int(arch["n_classes"]):
        raise FlowError("parameter document architecture does not match its tensors", payload=arch)
    return params


def save_params(params: DiffResNetParams, path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(params_to_dict(params), indent=2), encoding="utf-8")


def load_params(path: PathLike) -> DiffResNetParams:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise FlowError(f"cannot read parameters from {path}: {exc}") from exc
    return params_from_dict(doc)


def write_trace_csv(trace: MetricsTrace, path: PathLike, header_comment: Optional[str] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        if header_comment:
            f.write(f"# {header_comment}\n")
        writer = csv.writer(f)
        writer.writerow(TRACE_COLUMNS)
        for r in trace.records:
            writer.writerow([r.epoch] + [repr(float(getattr(r, c))) for c in TRACE_COLUMNS[1:]])
