from __future__ import annotations

import json

import numpy as np
import pytest
from pydantic import ValidationError

from app import main
from diffres_cli import (
    ConfigError,
    DiffuseConfig,
    FewShotConfig,
    Settings,
    TrainGraphConfig,
    TrainSyntheticConfig,
    VerifyConfig,
    config_hash,
    load_config,
    run_suites,
)
from diffres_cli.commands import _sweep_configs
from diffres_graph import PointSet, read_points_csv, read_weights_csv, write_points_csv

TINY_SYNTHETIC = {
    "dataset": "xor",
    "n_per": 15,
    "graph": {"n_top": 5, "sigma": 0.5},
    "diffusion": {"gamma": 0.2, "steps": 2},
    "optimizer": {"epochs": 3, "lr": 0.1},
    "snapshot_epochs": [0, 3],
    "seed": 1,
}


def _write_json(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def _comment_free(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path):
        path = _write_json(tmp_path / "c.json", {**TINY_SYNTHETIC, "bogus": 1})
        with pytest.raises(ValidationError):
            load_config(path, TrainSyntheticConfig)

    def test_nested_unknown_key_rejected(self):
        with pytest.raises(ValidationError):
            TrainSyntheticConfig.model_validate({**TINY_SYNTHETIC, "graph": {"n_top": 5, "sigma": 0.5, "k": 2}})

    def test_sigma_exactly_one(self):
        with pytest.raises(ValidationError):
            TrainSyntheticConfig.model_validate({**TINY_SYNTHETIC, "graph": {"n_top": 5}})
        with pytest.raises(ValidationError):
            TrainSyntheticConfig.model_validate({**TINY_SYNTHETIC, "graph": {"n_top": 5, "sigma": 1.0, "sigma_k": 3}})

    def test_exactly_one_source(self):
        with pytest.raises(ValidationError):
            TrainGraphConfig.model_validate({"diffusion": {"gamma": 0.1, "steps": 1}})
        with pytest.raises(ValidationError):
            FewShotConfig.model_validate({})
        with pytest.raises(ValidationError):
            DiffuseConfig.model_validate({"points_csv": "p.csv", "diffusion": {"gamma": 0.1, "steps": 1}})

    def test_defaults_and_missing_config(self):
        cfg = load_config(None, VerifyConfig)
        assert cfg.claims == ["stability", "oracle", "theorem1", "theorem2", "prop1"]
        with pytest.raises(ConfigError):
            load_config(None, TrainSyntheticConfig)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{\n  "seed": 1,\n  oops\n}\n')
        with pytest.raises(ConfigError, match=":3:"):
            load_config(path, VerifyConfig)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.json", VerifyConfig)

    def test_hash_tracks_content(self):
        a = VerifyConfig()
        assert config_hash(a) == config_hash(VerifyConfig())
        assert config_hash(a) != config_hash(VerifyConfig(seed=1))
        assert len(config_hash(a)) == 16

    def test_shipped_configs_parse(self):
        from pathlib import Path

        root = Path(__file__).resolve().parents[1] / "configs"
        models = {
            "circle": TrainSyntheticConfig,
            "moon": TrainSyntheticConfig,
            "spiral": TrainSyntheticConfig,
            "xor": TrainSyntheticConfig,
            "sbm": TrainGraphConfig,
            "cora": TrainGraphConfig,
            "fewshot": FewShotConfig,
            "fewshot_sweep": FewShotConfig,
            "verify": VerifyConfig,
        }
        for name, model in models.items():
            load_config(root / f"{name}.json", model)


class TestSettings:
    def test_output_dir_precedence(self, monkeypatch, tmp_path):
        monkeypatch.setenv("DIFFRES_OUTPUT_DIR", str(tmp_path / "env"))
        settings = Settings(dotenv_path=str(tmp_path / "missing.env"))
        assert settings.resolve_output_dir("explicit", "verify").name == "explicit"
        assert settings.resolve_output_dir(None, "verify") == tmp_path / "env" / "verify"

    def test_default_output_dir(self, monkeypatch, tmp_path):
        monkeypatch.delenv("DIFFRES_OUTPUT_DIR", raising=False)
        settings = Settings(dotenv_path=str(tmp_path / "missing.env"))
        assert str(settings.resolve_output_dir(None, "fewshot")) == "runs/fewshot"

    def test_log_level(self, monkeypatch, tmp_path):
        monkeypatch.setenv("DIFFRES_LOG_LEVEL", "debug")
        assert Settings(dotenv_path=str(tmp_path / "missing.env")).log_level == "DEBUG"


class TestMain:
    def test_verify_single_claim(self, tmp_path, capsys):
        code = main(["verify", "--claim", "theorem1", "--out", str(tmp_path)])
        assert code == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["passed"] is True
        assert [c["claim"] for c in report["claims"]] == ["theorem1"]
        assert report["claims"][0]["status"] == "pass"
        assert "theorem1: PASS" in capsys.readouterr().out

    def test_bad_config_exits_1(self, tmp_path, capsys):
        path = _write_json(tmp_path / "c.json", {**TINY_SYNTHETIC, "bogus": 1})
        assert main(["train-synthetic", "--config", path, "--out", str(tmp_path / "o")]) == 1
        assert "bogus" in capsys.readouterr().err

    def test_missing_required_config_exits_1(self, tmp_path):
        assert main(["train-synthetic", "--out", str(tmp_path)]) == 1

    def test_unknown_claim_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "--claim", "lemma9"])
        assert exc.value.code == 2

    def test_train_synthetic_outputs_and_seed(self, tmp_path):
        path = _write_json(tmp_path / "c.json", TINY_SYNTHETIC)
        assert main(["train-synthetic", "--config", path, "--seed", "7", "--out", str(tmp_path / "a")]) == 0
        assert main(["train-synthetic", "--config", path, "--seed", "7", "--out", str(tmp_path / "b")]) == 0
        assert main(["train-synthetic", "--config", path, "--seed", "8", "--out", str(tmp_path / "c")]) == 0
        for name in ("trace.csv", "snapshots.csv", "params.json", "points.csv"):
            assert (tmp_path / "a" / name).exists()
        assert (tmp_path / "a" / "trace.csv").read_text() == (tmp_path / "b" / "trace.csv").read_text()
        assert _comment_free(tmp_path / "a" / "points.csv") != _comment_free(tmp_path / "c" / "points.csv")
        header = (tmp_path / "a" / "trace.csv").read_text().splitlines()[0]
        assert header.startswith("# diffres train-synthetic config_sha256=")

    def test_seed_enters_the_hash(self, tmp_path):
        path = _write_json(tmp_path / "c.json", TINY_SYNTHETIC)
        main(["train-synthetic", "--config", path, "--seed", "7", "--out", str(tmp_path / "a")])
        main(["train-synthetic", "--config", path, "--seed", "8", "--out", str(tmp_path / "b")])
        first = (tmp_path / "a" / "trace.csv").read_text().splitlines()[0]
        second = (tmp_path / "b" / "trace.csv").read_text().splitlines()[0]
        assert first != second

    def test_build_graph_then_diffuse(self, tmp_path, rng):
        points = PointSet(rng.standard_normal((12, 2)), labels=np.repeat([0, 1], 6))
        write_points_csv(points, tmp_path / "points.csv")
        graph_cfg = _write_json(
            tmp_path / "g.json", {"points_csv": str(tmp_path / "points.csv"), "graph": {"n_top": 3, "sigma_k": 2}}
        )
        assert main(["build-graph", "--config", graph_cfg, "--out", str(tmp_path / "g")]) == 0
        weights = read_weights_csv(tmp_path / "g" / "weights.csv", n=12)
        assert weights.is_symmetric()

        diffuse_doc = {
            "points_csv": str(tmp_path / "points.csv"),
            "weights_csv": str(tmp_path / "g" / "weights.csv"),
            "diffusion": {"gamma": 0.1, "steps": 5},
        }
        diffuse_cfg = _write_json(tmp_path / "d.json", diffuse_doc)
        assert main(["diffuse", "--config", diffuse_cfg, "--out", str(tmp_path / "d")]) == 0
        moved = read_points_csv(tmp_path / "d" / "diffused.csv")
        np.testing.assert_array_equal(moved.labels, points.labels)
        np.testing.assert_allclose(moved.coords.sum(axis=0), points.coords.sum(axis=0), atol=1e-10)
        assert not np.allclose(moved.coords, points.coords)

        assert main(["diffuse", "--config", diffuse_cfg, "--no-diffusion", "--out", str(tmp_path / "n")]) == 0
        np.testing.assert_array_equal(read_points_csv(tmp_path / "n" / "diffused.csv").coords, points.coords)

    def test_unstable_diffusion_exits_1(self, tmp_path, rng, capsys):
        write_points_csv(PointSet(rng.standard_normal((10, 2))), tmp_path / "points.csv")
        doc = {
            "points_csv": str(tmp_path / "points.csv"),
            "graph": {"n_top": 3, "sigma": 1.0},
            "diffusion": {"gamma": 50.0, "steps": 1},
        }
        assert main(["diffuse", "--config", _write_json(tmp_path / "d.json", doc), "--out", str(tmp_path / "o")]) == 1
        assert "unstable" in capsys.readouterr().err

    def test_fewshot_synthetic(self, tmp_path):
        doc = {
            "synthetic": {"n_classes": 4, "n_sub": 2, "dim": 6, "n_per_sub": 10},
            "n_way": 3,
            "k_shot": 1,
            "n_query": 5,
            "episodes": 2,
            "methods": ["NearestPrototype", "Diffusion", "InternalCD"],
            "episode": {"epochs": 5, "steps": 2, "gamma": 0.1},
            "sweep": {"kind": "steps", "values": [0, 2], "method": "InternalCD"},
        }
        assert main(["fewshot", "--config", _write_json(tmp_path / "f.json", doc), "--out", str(tmp_path / "o")]) == 0
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert summary["NearestPrototype"]["n"] == 2
        assert len(summary["sweep"]["rows"]) == 2
        rows = _comment_free(tmp_path / "o" / "episodes.csv")
        assert rows[0] == "episode_id,method,accuracy"
        assert len(rows) == 1 + 2 * 3

    def test_train_graph_sbm(self, tmp_path):
        doc = {
            "sbm": {"classes": 2, "n_per": 60, "p_in": 0.2, "p_out": 0.01, "feat_dim": 8},
            "diffusion": {"gamma": 0.25, "steps": 2},
            "optimizer": {"epochs": 3, "lr": 0.5},
            "splits": 2,
            "inits": 1,
            "depth_sweep": [0, 1],
        }
        path = _write_json(tmp_path / "g.json", doc)
        assert main(["train-graph", "--config", path, "--out", str(tmp_path / "o")]) == 0
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert summary["runs"] == 2
        assert [row["steps"] for row in summary["depth_sweep"]] == [0, 1]
        assert len(_comment_free(tmp_path / "o" / "runs.csv")) == 3


class TestSweeps:
    @staticmethod
    def _config(kind, values):
        return FewShotConfig(
            synthetic={"n_classes": 4},
            episode={"n_top": 8, "sigma_k": 4},
            sweep={"kind": kind, "values": values},
        )

    def test_n_top_sweep_keeps_bandwidth(self):
        cfg = self._config("n_top", [2, 6, 16, 30])
        configs = _sweep_configs(cfg, cfg.episode.to_config(cfg.seed))
        assert [value for value, _ in configs] == [2, 6, 16, 30]
        assert [c.n_top for _, c in configs] == [2, 6, 16, 30]
        assert {c.sigma_k for _, c in configs} == {4}

    def test_sigma_k_sweep_keeps_neighbour_count(self):
        cfg = self._config("sigma_k", [1, 3, 9])
        configs = _sweep_configs(cfg, cfg.episode.to_config(cfg.seed))
        assert [c.sigma_k for _, c in configs] == [1, 3, 9]
        assert {c.n_top for _, c in configs} == {8}

    def test_fixed_strength_caps_gamma(self):
        cfg = self._config("fixed_strength", [0, 2, 10])
        configs = dict(_sweep_configs(cfg, cfg.episode.to_config(cfg.seed)))
        assert configs[2].gamma == 1.0
        assert configs[10].gamma == pytest.approx(0.5)
        assert configs[10].steps * configs[10].gamma == pytest.approx(5.0)


class TestProp1Defaults:
    def test_shipped_config_matches_defaults(self):
        from pathlib import Path

        shipped = load_config(Path(__file__).resolve().parents[1] / "configs" / "verify.json", VerifyConfig)
        assert (shipped.prop1_n_top, shipped.prop1_seed_offset) == (20, 3)
        assert (VerifyConfig().prop1_n_top, VerifyConfig().prop1_seed_offset) == (20, 3)

    def test_merged_disks_fail_on_component_count(self):
        # seed 0 at n_top=20 joins two XOR disks
        (result,) = run_suites(VerifyConfig(claims=["prop1"], prop1_seed_offset=0))
        assert not result.passed
        assert result.failures == ["W has 3 connected components, expected 4"]
        assert result.measured == {"components": 3}
