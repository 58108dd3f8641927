from __future__ import annotations

import csv
import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from diffres_datasets import (
    SYNTHETIC_GENERATORS,
    GraphDataset,
    gen_fewshot_features,
    gen_sbm,
    load_graph_dataset,
    sample_graph_split,
)
from diffres_diffusion import DiffusionConfig, diffuse
from diffres_fewshot import (
    Episode,
    EpisodeConfig,
    Method,
    read_features_csv,
    run_episode,
    sample_episodes,
    summarize_accuracies,
    write_episode_results,
    write_summary_json,
)
from diffres_flow import MetricsTrace, init_params, save_params, train, write_trace_csv
from diffres_graph import build_weight_matrix, read_points_csv, read_weights_csv, write_points_csv, write_weights_csv

from .config import (
    BuildGraphConfig,
    DiffuseConfig,
    FewShotConfig,
    TrainGraphConfig,
    TrainSyntheticConfig,
    VerifyConfig,
    config_hash,
    header_comment,
)
from .verify import run_suites

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CLAIM_FAILED = 2


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]], comment: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        f.write(f"# {comment}\n")
        writer = csv.writer(f)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _write_snapshots(trace: MetricsTrace, labels: np.ndarray, path: Path, comment: str) -> None:
    dim = next(iter(trace.snapshots.values())).shape[1] if trace.snapshots else 0
    rows = []
    for epoch in sorted(trace.snapshots):
        for i, vec in enumerate(trace.snapshots[epoch]):
            rows.append([epoch, i, *[float(v) for v in vec], int(labels[i])])
    _write_rows(path, ["epoch", "point", *[f"f_{k + 1}" for k in range(dim)], "label"], rows, comment)


def cmd_train_synthetic(cfg: TrainSyntheticConfig, out_dir: Path) -> int:
    """Train the diffusion residual network on one synthetic 2-D dataset; write trace, snapshots and parameters."""
    comment = header_comment("train-synthetic", cfg)
    rng = np.random.default_rng(cfg.seed)
    kwargs = {k: v for k, v in (("n_per", cfg.n_per), ("noise", cfg.noise)) if v is not None}
    if cfg.dataset == "xor":
        kwargs.pop("noise", None)
    points = SYNTHETIC_GENERATORS[cfg.dataset](rng, **kwargs)
    weights = build_weight_matrix(points, cfg.graph.n_top, cfg.graph.sigma_rule())
    diffusion = cfg.diffusion.to_config()
    n_classes = int(points.labels.max()) + 1
    params0 = init_params(
        points.dim, n_classes, rng, blocks=cfg.network.blocks, use_fc2=cfg.network.use_fc2, dropout_rate=cfg.network.dropout
    )
    params, trace = train(
        points,
        points.labeled_mask,
        weights if diffusion.active else None,
        params0,
        cfg.optimizer.to_config(diffusion, cfg.seed),
        snapshot_epochs=cfg.snapshot_epochs,
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out_dir / "trace.csv", header_comment=comment)
    if trace.snapshots:
        _write_snapshots(trace, points.labels, out_dir / "snapshots.csv", comment)
    save_params(params, out_dir / "params.json")
    write_points_csv(points, out_dir / "points.csv", header_comment=comment)

    last = trace.last
    print("=== train-synthetic ===")
    print(f"Dataset: {cfg.dataset} ({points.n} points)")
    print(f"Parameters: {params.n_parameters}")
    print(f"Diffusion: gamma={diffusion.gamma} steps={diffusion.steps}")
    print(f"Final loss: {last.loss:.6f}")
    print(f"Final training accuracy: {last.train_acc:.4f}")
    reached = trace.first_epoch_reaching("train_acc", 0.99)
    print(f"First epoch at >= 99%: {reached if reached is not None else 'never'}")
    print(f"Outputs: {out_dir}")
    return EXIT_OK


def _graph_source(cfg: TrainGraphConfig, rng: np.random.Generator) -> GraphDataset:
    if cfg.files is not None:
        return load_graph_dataset(cfg.files.edges, cfg.files.features, cfg.files.labels)
    sbm = cfg.sbm
    return gen_sbm(
        sbm.classes,
        sbm.n_per,
        sbm.p_in,
        sbm.p_out,
        sbm.feat_dim,
        rng,
        feature_kind=sbm.features,
        signal=sbm.signal,
        noise=sbm.noise,
    )


def _graph_runs(
    cfg: TrainGraphConfig, ds: GraphDataset, diffusion: DiffusionConfig
) -> List[Tuple[int, int, float, int]]:
    """(split, init, test accuracy at best validation, best epoch) per run."""
    results = []
    points = ds.points()
    for s in range(cfg.splits):
        split = sample_graph_split(ds.labels, np.random.default_rng([cfg.seed, s]), cfg.n_train, cfg.n_val)
        train_mask, val_mask, test_mask = split.masks(ds.n)
        for i in range(cfg.inits):
            init_rng = np.random.default_rng([cfg.seed, s, i])
            params0 = init_params(
                points.dim,
                ds.n_classes,
                init_rng,
                blocks=cfg.network.blocks,
                use_fc2=cfg.network.use_fc2,
                dropout_rate=cfg.network.dropout,
            )
            _, trace = train(
                points,
                train_mask,
                ds.adjacency if diffusion.active else None,
                params0,
                cfg.optimizer.to_config(diffusion, int(init_rng.integers(2**31))),
                val_mask=val_mask,
                test_mask=test_mask,
            )
            best = trace.best_validation()
            results.append((s, i, best.test_acc, best.epoch))
            logger.debug("split %d init %d: test %.4f at epoch %d", s, i, best.test_acc, best.epoch)
    return results


def cmd_train_graph(cfg: TrainGraphConfig, out_dir: Path) -> int:
    """Repeated split x init training on a graph; report test accuracy at the best validation epoch."""
    comment = header_comment("train-graph", cfg)
    ds = _graph_source(cfg, np.random.default_rng(cfg.seed))
    diffusion = cfg.diffusion.to_config()
    runs = _graph_runs(cfg, ds, diffusion)
    accs = [r[2] for r in runs]
    summary = {
        "nodes": ds.n,
        "edges": ds.n_edges,
        "classes": ds.n_classes,
        "gamma": diffusion.gamma,
        "steps": diffusion.steps,
        "runs": len(runs),
        "mean": float(np.mean(accs)),
        "std": float(np.std(accs)),
        "config_sha256": config_hash(cfg),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_rows(out_dir / "runs.csv", ["split", "init", "test_acc", "best_epoch"], runs, comment)

    if cfg.depth_sweep:
        sweep_rows = []
        for steps in cfg.depth_sweep:
            sweep_cfg = DiffusionConfig(gamma=diffusion.gamma, steps=steps)
            depth_accs = [r[2] for r in _graph_runs(cfg, ds, sweep_cfg)]
            sweep_rows.append([steps, float(np.mean(depth_accs)), float(np.std(depth_accs))])
            print(f"Depth {steps}: {np.mean(depth_accs):.4f} +/- {np.std(depth_accs):.4f}")
        _write_rows(out_dir / "depth_sweep.csv", ["steps", "mean", "std"], sweep_rows, comment)
        summary["depth_sweep"] = [{"steps": r[0], "mean": r[1], "std": r[2]} for r in sweep_rows]
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")

    print("=== train-graph ===")
    print(f"Graph: {ds.n} nodes, {ds.n_edges} edges, {ds.n_classes} classes")
    print(f"Runs: {cfg.splits} splits x {cfg.inits} inits")
    print(f"Test accuracy: {summary['mean']:.4f} +/- {summary['std']:.4f}")
    print(f"Outputs: {out_dir}")
    return EXIT_OK


def _read_vector_csv(path: str) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.reader(line for line in f if line.strip() and not line.startswith("#")):
            rows.append([float(v) for v in row])
    return np.asarray(rows, dtype=float).ravel()


def _load_episodes(cfg: FewShotConfig, rng: np.random.Generator) -> List[Episode]:
    if cfg.synthetic is not None:
        syn = cfg.synthetic
        feats = gen_fewshot_features(
            syn.n_classes,
            syn.n_sub,
            syn.dim,
            syn.n_per_sub,
            rng,
            center_scale=syn.center_scale,
            sub_scale=syn.sub_scale,
            noise=syn.noise,
        )
        by_class, base_mean = feats.features_by_class, feats.base_mean
    else:
        by_class = read_features_csv(cfg.features_csv)
        base_mean = _read_vector_csv(cfg.base_mean_csv) if cfg.base_mean_csv else None
    return sample_episodes(by_class, cfg.n_way, cfg.k_shot, cfg.n_query, cfg.episodes, rng, base_mean=base_mean)


def _sweep_configs(cfg: FewShotConfig, base: EpisodeConfig) -> List[Tuple[int, EpisodeConfig]]:
    sweep = cfg.sweep
    out = []
    for value in sweep.values:
        if sweep.kind == "n_top":
            out.append((value, replace(base, n_top=value)))
        elif sweep.kind == "sigma_k":
            out.append((value, replace(base, sigma_k=value)))
        elif sweep.kind == "steps":
            out.append((value, replace(base, steps=value)))
        else:
            # r gamma held at the strength, gamma capped at 1
            gamma = min(1.0, sweep.strength / value) if value > 0 else base.gamma
            out.append((value, replace(base, steps=value, gamma=gamma)))
    return out


def cmd_fewshot(cfg: FewShotConfig, out_dir: Path) -> int:
    """Paired evaluation of the requested methods over one shared set of episodes."""
    comment = header_comment("fewshot", cfg)
    rng = np.random.default_rng(cfg.seed)
    episodes = _load_episodes(cfg, rng)
    base = cfg.episode.to_config(cfg.seed)

    rows: List[Tuple[int, str, float]] = []
    per_method: Dict[str, List[float]] = {Method(m).value: [] for m in cfg.methods}
    for e, episode in enumerate(episodes):
        for method in cfg.methods:
            acc = run_episode(method, episode, base).accuracy
            rows.append((e, Method(method).value, acc))
            per_method[Method(method).value].append(acc)

    out_dir.mkdir(parents=True, exist_ok=True)
    write_episode_results(rows, out_dir / "episodes.csv", header_comment=comment)
    summary: Dict[str, object] = {name: summarize_accuracies(accs) for name, accs in per_method.items()}
    summary["config_sha256"] = config_hash(cfg)

    print("=== fewshot ===")
    print(f"Episodes: {len(episodes)} ({cfg.n_way}-way {cfg.k_shot}-shot, {cfg.n_query} queries/class)")
    for name, accs in per_method.items():
        s = summarize_accuracies(accs)
        print(f"{name}: {100 * s['mean']:.2f}% +/- {100 * s['ci95']:.2f}")

    if cfg.sweep is not None:
        sweep_rows = []
        for value, sweep_cfg in _sweep_configs(cfg, base):
            accs = [run_episode(cfg.sweep.method, ep, sweep_cfg).accuracy for ep in episodes]
            s = summarize_accuracies(accs)
            sweep_rows.append([value, sweep_cfg.gamma, s["mean"], s["ci95"]])
            print(f"{cfg.sweep.kind}={value}: {100 * s['mean']:.2f}%")
        _write_rows(out_dir / "sweep.csv", [cfg.sweep.kind, "gamma", "mean", "ci95"], sweep_rows, comment)
        summary["sweep"] = {"kind": cfg.sweep.kind, "rows": sweep_rows}
    write_summary_json(summary, out_dir / "summary.json")
    print(f"Outputs: {out_dir}")
    return EXIT_OK


def cmd_verify(cfg: VerifyConfig, out_dir: Path) -> int:
    """Run the theory suites; exit 2 when any claim fails."""
    results = run_suites(cfg)
    report = {
        "config_sha256": config_hash(cfg),
        "passed": all(r.passed for r in results),
        "claims": [r.to_dict() for r in results],
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")

    print("=== verify ===")
    for r in results:
        print(f"{r.claim}: {'PASS' if r.passed else 'FAIL'}")
        for failure in r.failures[:5]:
            print(f"  - {failure}")
    print(f"Report: {out_dir / 'report.json'}")
    return EXIT_OK if report["passed"] else EXIT_CLAIM_FAILED


def cmd_build_graph(cfg: BuildGraphConfig, out_dir: Path) -> int:
    points = read_points_csv(cfg.points_csv)
    weights = build_weight_matrix(points, cfg.graph.n_top, cfg.graph.sigma_rule())
    out_path = out_dir / cfg.output
    write_weights_csv(weights, out_path, header_comment=header_comment("build-graph", cfg))
    print("=== build-graph ===")
    print(f"Points: {points.n} (d={points.dim})")
    print(f"Nonzeros: {weights.nnz}")
    print(f"Max degree: {float(weights.degrees.max()):.6f}")
    print(f"Output: {out_path}")
    return EXIT_OK


def cmd_diffuse(cfg: DiffuseConfig, out_dir: Path) -> int:
    points = read_points_csv(cfg.points_csv)
    if cfg.weights_csv is not None:
        weights = read_weights_csv(cfg.weights_csv, n=points.n)
    else:
        weights = build_weight_matrix(points, cfg.graph.n_top, cfg.graph.sigma_rule())
    diffusion = cfg.diffusion.to_config()
    out = points.with_coords(diffuse(points.coords, weights, diffusion))
    out_path = out_dir / cfg.output
    write_points_csv(out, out_path, header_comment=header_comment("diffuse", cfg))
    print("=== diffuse ===")
    print(f"Points: {points.n}, gamma={diffusion.gamma}, steps={diffusion.steps}")
    print(f"Output: {out_path}")
    return EXIT_OK
