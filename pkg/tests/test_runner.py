import json
import os
import subprocess
import sys

import numpy as np
import pytest

from ssgcn.reporting import format_table, read_agg_rows, write_report
from ssgcn.runner import (
    AggregateReport,
    ConfigError,
    parse_config,
    resolve_dataset_path,
    run,
    run_single,
)
from ssgcn.synth import write_synthetic_dataset


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    write_synthetic_dataset(
        root / "synth",
        num_nodes=120,
        num_classes=3,
        feature_dim=30,
        labels_per_class=6,
        val_size=20,
        test_size=60,
        seed=3,
        name="synth",
    )
    return root


def write_config(path, **overrides):
    doc = {
        "name": "demo",
        "dataset": "synth",
        "scheme": "plain",
        "task": "none",
        "seeds": [0, 1],
        "train.epochs": 40,
        "train.patience": 15,
        "train.hidden_dim": 16,
    }
    doc.update(overrides)
    path.write_text(json.dumps(doc))
    return path


class TestParseConfig:
    def test_round_trip(self, tmp_path, data_dir):
        cfg = parse_config(write_config(tmp_path / "c.json"))
        assert cfg.scheme == "plain"
        assert cfg.seeds == [0, 1]
        assert cfg.train.epochs == 40

    def test_seed_count_shorthand(self, tmp_path):
        cfg = parse_config(write_config(tmp_path / "c.json", seeds=3))
        assert cfg.seeds == [0, 1, 2]

    def test_scheme_task_invariant(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(write_config(tmp_path / "c.json", scheme="mtl", task="none"))
        with pytest.raises(ConfigError):
            parse_config(write_config(tmp_path / "c.json", scheme="plain", task="par"))

    def test_unknown_keys_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown config keys"):
            parse_config(write_config(tmp_path / "c.json", **{"train.bogus": 1}))

    def test_missing_dataset_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(write_config(tmp_path / "c.json", dataset=""))

    def test_env_var_resolution(self, tmp_path, data_dir, monkeypatch):
        monkeypatch.setenv("SSGCN_DATA_DIR", str(data_dir))
        assert resolve_dataset_path("synth") == data_dir / "synth"
        monkeypatch.delenv("SSGCN_DATA_DIR")
        with pytest.raises(ConfigError):
            resolve_dataset_path("synth")


class TestRun:
    def test_writes_outputs_and_aggregates(self, tmp_path, data_dir, monkeypatch):
        monkeypatch.setenv("SSGCN_DATA_DIR", str(data_dir))
        cfg = parse_config(write_config(tmp_path / "c.json"))
        report = run(cfg, out_dir=tmp_path)
        assert len(report.records) == 2
        jsonl = (tmp_path / "demo.runs.jsonl").read_text().strip().splitlines()
        assert len(jsonl) == 2
        rec = json.loads(jsonl[0])
        assert set(rec) == {"dataset", "scheme", "task", "seed", "accuracy", "best_epoch"}
        csv_text = (tmp_path / "demo.agg.csv").read_text()
        assert "demo" in csv_text

    def test_deterministic_record_bytes(self, tmp_path, data_dir, monkeypatch):
        monkeypatch.setenv("SSGCN_DATA_DIR", str(data_dir))
        cfg = parse_config(write_config(tmp_path / "c.json", seeds=[7]))
        run(cfg, out_dir=tmp_path / "a")
        run(cfg, out_dir=tmp_path / "b")
        assert (tmp_path / "a/demo.runs.jsonl").read_bytes() == (
            tmp_path / "b/demo.runs.jsonl"
        ).read_bytes()

    def test_mean_std_recomputable_from_jsonl(self, tmp_path, data_dir, monkeypatch):
        monkeypatch.setenv("SSGCN_DATA_DIR", str(data_dir))
        cfg = parse_config(write_config(tmp_path / "c.json", seeds=[0, 1, 2]))
        run(cfg, out_dir=tmp_path)
        recs = [
            json.loads(line)
            for line in (tmp_path / "demo.runs.jsonl").read_text().splitlines()
        ]
        accs = [r["accuracy"] for r in recs]
        mean, std = AggregateReport.aggregate(accs)
        import csv as csvmod

        with (tmp_path / "demo.agg.csv").open() as fh:
            row = next(csvmod.DictReader(fh))
        assert abs(float(row["mean"]) - mean) < 1e-9
        assert abs(float(row["std"]) - std) < 1e-9

    def test_mtl_with_auto_selection(self, tmp_path, data_dir, monkeypatch):
        monkeypatch.setenv("SSGCN_DATA_DIR", str(data_dir))
        cfg = parse_config(
            write_config(
                tmp_path / "c.json",
                name="mtl_demo",
                scheme="mtl",
                task="clu",
                seeds=[0],
                **{"task.k": 6, "train.alpha_ssl": 0.5},
            )
        )
        report = run(cfg, out_dir=tmp_path)
        assert report.records[0]["task"] == "clu"
        assert report.records[0]["accuracy"] > 0.5

    def test_parallel_matches_serial(self, tmp_path, data_dir, monkeypatch):
        monkeypatch.setenv("SSGCN_DATA_DIR", str(data_dir))
        cfg = parse_config(write_config(tmp_path / "c.json", seeds=[0, 1]))
        r1 = run(cfg, jobs=1, out_dir=tmp_path / "serial")
        r2 = run(cfg, jobs=2, out_dir=tmp_path / "par")
        assert (tmp_path / "serial/demo.runs.jsonl").read_bytes() == (
            tmp_path / "par/demo.runs.jsonl"
        ).read_bytes()


class TestReport:
    def make_rows(self, tmp_path, data_dir, monkeypatch):
        monkeypatch.setenv("SSGCN_DATA_DIR", str(data_dir))
        paths = []
        for name, scheme, task in (
            ("r_plain", "plain", "none"),
            ("r_mtl", "mtl", "clu"),
        ):
            overrides = {"name": name, "scheme": scheme, "task": task, "seeds": [0]}
            if scheme == "mtl":
                overrides["task.k"] = 6
            cfg = parse_config(write_config(tmp_path / f"{name}.json", **overrides))
            run(cfg, out_dir=tmp_path)
            paths.append(tmp_path / f"{name}.agg.csv")
        return paths

    def test_single_row_table(self, tmp_path, data_dir, monkeypatch):
        paths = self.make_rows(tmp_path, data_dir, monkeypatch)[:1]
        rows = read_agg_rows(paths)
        table = format_table(rows)
        assert "GCN" in table and "synth" in table

    def test_best_flagging_and_files(self, tmp_path, data_dir, monkeypatch):
        paths = self.make_rows(tmp_path, data_dir, monkeypatch)
        md, png = write_report(paths, tmp_path / "report")
        assert md.exists() and png.exists()
        table = md.read_text()
        assert "MTL-Clu" in table
        assert "**" in table  # best-two flagging present

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            format_table([])


class TestCli:
    def run_cli(self, *args, env=None):
        e = dict(os.environ)
        if env:
            e.update(env)
        return subprocess.run(
            [sys.executable, "-m", "ssgcn.cli", *args],
            capture_output=True,
            text=True,
            env=e,
        )

    def test_synth_run_report_pipeline(self, tmp_path):
        out = self.run_cli("synth", "--out", str(tmp_path / "data/synth"),
                           "--nodes", "120", "--classes", "3", "--feature-dim", "30",
                           "--labels-per-class", "6")
        assert out.returncode == 0, out.stderr
        cfg = write_config(tmp_path / "exp.json", seeds=[0])
        res = self.run_cli(
            "run", "--config", str(cfg), "--out-dir", str(tmp_path),
            env={"SSGCN_DATA_DIR": str(tmp_path / "data")},
        )
        assert res.returncode == 0, res.stderr
        assert (tmp_path / "demo.agg.csv").exists()
        rep = self.run_cli(
            "report", str(tmp_path / "demo.agg.csv"), "--out", str(tmp_path / "rep")
        )
        assert rep.returncode == 0, rep.stderr
        assert (tmp_path / "rep.md").exists()
        assert (tmp_path / "rep.png").exists()

    def test_invalid_config_nonzero_exit(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"scheme": "nope", "dataset": "x"}))
        res = self.run_cli("run", "--config", str(bad))
        assert res.returncode == 2
        assert "error" in res.stderr.lower()

    def test_attack_cache(self, tmp_path):
        self.run_cli("synth", "--out", str(tmp_path / "data/synth"),
                     "--nodes", "120", "--classes", "3", "--feature-dim", "30",
                     "--labels-per-class", "6")
        cfg = write_config(
            tmp_path / "exp.json",
            name="atk",
            seeds=[0],
            **{"attack.n_perturb": 1, "attack.eval_targets": 6},
        )
        res = self.run_cli(
            "attack-cache", "--config", str(cfg), "--out", str(tmp_path / "atk.json"),
            env={"SSGCN_DATA_DIR": str(tmp_path / "data")},
        )
        assert res.returncode == 0, res.stderr
        doc = json.loads((tmp_path / "atk.json").read_text())
        assert len(doc["perturbations"]) == 6
        assert "model_checksum" in doc["key"]

        from ssgcn.adversarial import perturbations_from_json

        perts = perturbations_from_json(doc)
        assert all(p.size() <= 1 for p in perts)
