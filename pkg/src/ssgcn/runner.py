"""Experiment orchestration: config parsing, seed sweeps and aggregation.

Config files are flat JSON with dotted keys, e.g.::

    {
      "name": "demo_mtl_par",
      "dataset": "data/synth",
      "scheme": "mtl",
      "task": "par",
      "seeds": 10,
      "train.epochs": 300,
      "task.k": "auto"
    }

``dataset`` is a directory path, resolved against $SSGCN_DATA_DIR when it
is not a directory on its own. ``seeds`` is either an explicit list or a
count n meaning seeds 0..n-1. ``task.k`` and ``train.alpha_ssl`` accept
"auto", which selects from a small grid by validation accuracy using the
first seed before the sweep runs.

Each call writes ``<name>.runs.jsonl`` (one deterministic record per
seed) and ``<name>.agg.csv`` (one aggregate row).
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .adversarial import (
    AttackConfig,
    adversarial_train,
    adversarial_train_ss,
    evaluate_under_attack,
)
from .data import Dataset, load_dataset
from .nn import TrainConfig
from .partition import PartitionConfig
from .schemes import (
    STREAM_TASK,
    RunResult,
    derive_seed,
    pretrain_finetune,
    self_train,
    train_multitask,
    train_supervised,
)
from .ssl_tasks import SslTask, graph_completion, graph_partition, node_clustering

logger = logging.getLogger(__name__)

SCHEMES = ("plain", "pf", "st", "mtl", "advt", "advt_ss")
TASKS = ("none", "clu", "par", "comp")
TASKLESS_SCHEMES = ("plain", "st", "advt")

ALPHA_GRID = (0.1, 0.3, 1.0, 3.0, 10.0)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    name: str
    dataset: str
    scheme: str
    task: str
    seeds: list[int]
    train: TrainConfig = field(default_factory=TrainConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    task_k: int | str = "auto"
    task_epsilon: float = 0.05
    task_refinement_passes: int = 8
    task_mask_fraction: float = 0.1
    task_kmeans_iters: int = 100
    alpha_ssl_auto: bool = False
    st_stages: int = 3
    st_additions_per_class: int | None = None
    pretrain_epochs: int = 200
    eval_targets: int = 200
    row_normalize: bool = True

    def validate(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme '{self.scheme}'")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task '{self.task}'")
        if (self.task == "none") != (self.scheme in TASKLESS_SCHEMES):
            raise ConfigError(
                f"scheme '{self.scheme}' requires task "
                f"{'none' if self.scheme in TASKLESS_SCHEMES else 'clu|par|comp'}"
            )
        if not self.seeds:
            raise ConfigError("at least one seed is required")


def _pop(doc: dict, key: str, default):
    return doc.pop(key, default)


def parse_config(path) -> ExperimentConfig:
    """Parse and validate a flat dotted-key JSON config file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    doc = dict(doc)

    seeds = _pop(doc, "seeds", 1)
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    elif isinstance(seeds, list) and all(isinstance(s, int) for s in seeds):
        seeds = list(seeds)
    else:
        raise ConfigError("'seeds' must be an int count or a list of ints")

    train_kwargs = {}
    for fname in (
        "learning_rate",
        "weight_decay",
        "epochs",
        "patience",
        "hidden_dim",
        "dropout",
        "alpha_sup",
        "alpha_adv",
    ):
        if f"train.{fname}" in doc:
            train_kwargs[fname] = doc.pop(f"train.{fname}")
    alpha_ssl = doc.pop("train.alpha_ssl", 1.0)
    alpha_ssl_auto = alpha_ssl == "auto"
    if not alpha_ssl_auto:
        train_kwargs["alpha_ssl"] = float(alpha_ssl)
    try:
        train = TrainConfig(**train_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad train.* settings: {exc}") from exc

    attack_kwargs = {}
    for fname in ("mode", "n_perturb", "regen_period", "n_attack", "n_clean"):
        if f"attack.{fname}" in doc:
            attack_kwargs[fname] = doc.pop(f"attack.{fname}")
    try:
        attack = AttackConfig(**attack_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad attack.* settings: {exc}") from exc

    cfg = ExperimentConfig(
        name=str(_pop(doc, "name", path.stem)),
        dataset=str(_pop(doc, "dataset", "")),
        scheme=str(_pop(doc, "scheme", "plain")),
        task=str(_pop(doc, "task", "none")),
        seeds=seeds,
        train=train,
        attack=attack,
        task_k=_pop(doc, "task.k", "auto"),
        task_epsilon=float(_pop(doc, "task.epsilon", 0.05)),
        task_refinement_passes=int(_pop(doc, "task.refinement_passes", 8)),
        task_mask_fraction=float(_pop(doc, "task.mask_fraction", 0.1)),
        task_kmeans_iters=int(_pop(doc, "task.kmeans_iters", 100)),
        alpha_ssl_auto=alpha_ssl_auto,
        st_stages=int(_pop(doc, "st.stages", 3)),
        st_additions_per_class=_pop(doc, "st.additions_per_class", None),
        pretrain_epochs=int(_pop(doc, "pretrain.epochs", 200)),
        eval_targets=int(_pop(doc, "attack.eval_targets", 200)),
        row_normalize=bool(_pop(doc, "row_normalize", True)),
    )
    if not cfg.dataset:
        raise ConfigError("'dataset' is required")
    if doc:
        raise ConfigError(f"unknown config keys: {sorted(doc)}")
    cfg.validate()
    return cfg


def resolve_dataset_path(dataset: str) -> Path:
    """Resolve a dataset name or path, honoring $SSGCN_DATA_DIR."""
    p = Path(dataset)
    if p.is_dir():
        return p
    root = os.environ.get("SSGCN_DATA_DIR")
    if root and (Path(root) / dataset).is_dir():
        return Path(root) / dataset
    raise ConfigError(f"dataset directory not found: {dataset}")


@lru_cache(maxsize=4)
def _load_dataset_cached(path: str, row_normalize: bool) -> Dataset:
    return load_dataset(path, row_normalize=row_normalize)


def _build_task(ds: Dataset, cfg: ExperimentConfig, k: int, seed: int) -> SslTask:
    task_seed = derive_seed(seed, STREAM_TASK)
    if cfg.task == "clu":
        return node_clustering(
            ds.features, k, seed=task_seed, max_iters=cfg.task_kmeans_iters
        )
    if cfg.task == "par":
        return graph_partition(
            ds.graph,
            PartitionConfig(
                k=k,
                epsilon=cfg.task_epsilon,
                refinement_passes=cfg.task_refinement_passes,
                seed=task_seed,
            ),
        )
    if cfg.task == "comp":
        return graph_completion(ds.features, cfg.task_mask_fraction, seed=task_seed)
    raise ConfigError(f"scheme '{cfg.scheme}' needs a task")


_TASK_KIND = {"clu": "clustering", "par": "partitioning", "comp": "completion"}


def run_single(cfg: ExperimentConfig, seed: int, ds: Dataset | None = None) -> dict:
    """Execute one (config, seed) run and return its JSONL record."""
    if ds is None:
        ds = _load_dataset_cached(str(resolve_dataset_path(cfg.dataset)), cfg.row_normalize)
    train_cfg = replace(cfg.train, seed=seed)
    k = ds.num_classes if cfg.task_k == "auto" else int(cfg.task_k)

    if cfg.scheme == "plain":
        _, result = train_supervised(ds, train_cfg)
    elif cfg.scheme == "st":
        _, result = self_train(
            ds, train_cfg, stages=cfg.st_stages,
            additions_per_class=cfg.st_additions_per_class,
        )
    elif cfg.scheme == "mtl":
        task = _build_task(ds, cfg, k, seed)
        _, result = train_multitask(ds, task, train_cfg)
    elif cfg.scheme == "pf":
        task = _build_task(ds, cfg, k, seed)
        _, result = pretrain_finetune(ds, task, train_cfg, cfg.pretrain_epochs)
    elif cfg.scheme == "advt":
        params, result = adversarial_train(ds, train_cfg, cfg.attack)
        result = _attach_attacked_accuracy(params, result, ds, cfg, seed)
    elif cfg.scheme == "advt_ss":
        params, result = adversarial_train_ss(
            ds,
            _TASK_KIND[cfg.task],
            train_cfg,
            cfg.attack,
            task_k=k or None,
            task_epsilon=cfg.task_epsilon,
            task_mask_fraction=cfg.task_mask_fraction,
        )
        result = _attach_attacked_accuracy(params, result, ds, cfg, seed)
    else:
        raise ConfigError(f"unknown scheme '{cfg.scheme}'")

    return {
        "dataset": ds.name,
        "scheme": cfg.scheme,
        "task": cfg.task,
        "seed": seed,
        "accuracy": result.test_accuracy,
        "best_epoch": result.best_epoch,
    }


def _attach_attacked_accuracy(
    params, result: RunResult, ds: Dataset, cfg: ExperimentConfig, seed: int
) -> RunResult:
    """For adversarial schemes the reported accuracy is measured under
    attack on a seeded sample of the test split."""
    rng = np.random.default_rng(derive_seed(seed, STREAM_TASK + 1))
    n = min(cfg.eval_targets, ds.splits.test.size)
    targets = np.sort(rng.choice(ds.splits.test, size=n, replace=False))
    attacked = evaluate_under_attack(params, ds, cfg.attack, targets)
    result.test_accuracy = attacked
    return result


def _select_auto(cfg: ExperimentConfig, ds: Dataset) -> ExperimentConfig:
    """Resolve "auto" grids by validation accuracy on the first seed."""
    seed = cfg.seeds[0]
    if cfg.task_k == "auto" and cfg.task in ("clu", "par"):
        grid = [ds.num_classes, 2 * ds.num_classes, 4 * ds.num_classes]
        grid = [k for k in grid if k <= ds.num_nodes]
    else:
        grid = [int(cfg.task_k)] if cfg.task_k != "auto" else [ds.num_classes]
    alpha_grid = ALPHA_GRID if cfg.alpha_ssl_auto else (cfg.train.alpha_ssl,)

    if len(grid) == 1 and len(alpha_grid) == 1:
        return replace(
            cfg, task_k=grid[0], alpha_ssl_auto=False,
            train=replace(cfg.train, alpha_ssl=alpha_grid[0]),
        )

    best = (-1.0, grid[0], alpha_grid[0])
    for k in grid:
        task = _build_task(ds, cfg, k, seed)
        for alpha in alpha_grid:
            train_cfg = replace(cfg.train, seed=seed, alpha_ssl=alpha)
            if cfg.scheme == "mtl":
                _, result = train_multitask(ds, task, train_cfg)
            elif cfg.scheme == "pf":
                _, result = pretrain_finetune(ds, task, train_cfg, cfg.pretrain_epochs)
            else:
                _, result = train_multitask(ds, task, train_cfg)
            logger.info(
                "selection: k=%d alpha_ssl=%.2f val=%.4f", k, alpha,
                result.best_val_accuracy,
            )
            if result.best_val_accuracy > best[0]:
                best = (result.best_val_accuracy, k, alpha)
    logger.info("selected k=%d alpha_ssl=%.2f", best[1], best[2])
    return replace(
        cfg, task_k=best[1], alpha_ssl_auto=False,
        train=replace(cfg.train, alpha_ssl=best[2]),
    )


def _pool_entry(args):
    cfg_json, seed = args
    cfg = _config_from_json(cfg_json)
    return run_single(cfg, seed)


def _config_to_json(cfg: ExperimentConfig) -> str:
    doc = asdict(cfg)
    return json.dumps(doc, sort_keys=True)


def _config_from_json(blob: str) -> ExperimentConfig:
    doc = json.loads(blob)
    doc["train"] = TrainConfig(**doc["train"])
    doc["attack"] = AttackConfig(**doc["attack"])
    return ExperimentConfig(**doc)


@dataclass
class AggregateReport:
    """Per-seed records plus their mean and sample standard deviation."""

    name: str
    records: list[dict]
    errors: list[dict]
    mean: float
    std: float
    wall_time_s: float
    config: ExperimentConfig

    @staticmethod
    def aggregate(accuracies) -> tuple[float, float]:
        acc = np.asarray(list(accuracies), dtype=np.float64)
        mean = float(acc.mean()) if acc.size else float("nan")
        std = float(acc.std(ddof=1)) if acc.size > 1 else 0.0
        return mean, std


def run(cfg: ExperimentConfig, jobs: int = 1, out_dir=".") -> AggregateReport:
    """Execute all seeds, write runs JSONL and the aggregate CSV row."""
    cfg.validate()
    t0 = time.perf_counter()
    ds = _load_dataset_cached(str(resolve_dataset_path(cfg.dataset)), cfg.row_normalize)
    if cfg.task_k == "auto" or cfg.alpha_ssl_auto:
        if cfg.scheme in ("mtl", "pf", "advt_ss"):
            cfg = _select_auto(cfg, ds)
        else:
            cfg = replace(cfg, task_k=0, alpha_ssl_auto=False)

    records: list[dict] = []
    errors: list[dict] = []
    if jobs <= 1:
        for seed in cfg.seeds:
            try:
                records.append(run_single(cfg, seed, ds))
            except Exception as exc:  # noqa: BLE001 - per-seed isolation
                logger.warning("seed %d failed: %s", seed, exc)
                errors.append({"seed": seed, "error": str(exc)})
    else:
        blob = _config_to_json(cfg)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                seed: pool.submit(_pool_entry, (blob, seed)) for seed in cfg.seeds
            }
            for seed in cfg.seeds:  # merge in seed order
                try:
                    records.append(futures[seed].result())
                except Exception as exc:  # noqa: BLE001
                    logger.warning("seed %d failed: %s", seed, exc)
                    errors.append({"seed": seed, "error": str(exc)})
    if errors:
        logger.warning(
            "aggregating over %d/%d completed seeds", len(records), len(cfg.seeds)
        )

    mean, std = AggregateReport.aggregate(r["accuracy"] for r in records)
    wall = time.perf_counter() - t0
    report = AggregateReport(
        name=cfg.name, records=records, errors=errors,
        mean=mean, std=std, wall_time_s=wall, config=cfg,
    )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / f"{cfg.name}.runs.jsonl").open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        for rec in errors:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with (out / f"{cfg.name}.agg.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["name", "dataset", "scheme", "task", "n_seeds", "mean", "std",
             "wall_time_s", "config"]
        )
        writer.writerow(
            [cfg.name, ds.name, cfg.scheme, cfg.task, len(records),
             f"{mean:.10f}", f"{std:.10f}", f"{wall:.3f}", _config_to_json(cfg)]
        )
    logger.info(
        "%s: mean accuracy %.4f +/- %.4f over %d seeds (%.1fs)",
        cfg.name, mean, std, len(records), wall,
    )
    return report
