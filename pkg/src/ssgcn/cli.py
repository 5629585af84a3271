"""Command line entry points.

    ssgcn run --config exp.json [--jobs N] [--out-dir DIR]
    ssgcn report runs/*.agg.csv [--out report]
    ssgcn attack-cache --config exp.json [--out FILE]
    ssgcn synth --out data/synth [--nodes N ...]
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np


def _cmd_run(args) -> int:
    from .runner import ConfigError, parse_config, run

    try:
        cfg = parse_config(args.config)
        run(cfg, jobs=args.jobs, out_dir=args.out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _cmd_report(args) -> int:
    from .reporting import format_table, read_agg_rows, write_report

    rows = read_agg_rows(args.csvs)
    if not rows:
        print("error: no aggregate rows found", file=sys.stderr)
        return 2
    md, png = write_report(args.csvs, args.out)
    print(format_table(rows))
    print(f"wrote {md} and {png}")
    return 0


def _cmd_attack_cache(args) -> int:
    from .adversarial import (
        linearized_weights,
        nettack_lite,
        perturbations_to_json,
        predict_pseudo_labels,
    )
    from .nn import params_checksum
    from .runner import ConfigError, parse_config, resolve_dataset_path, _load_dataset_cached
    from .schemes import STREAM_TASK, derive_seed, train_supervised

    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ds = _load_dataset_cached(str(resolve_dataset_path(cfg.dataset)), cfg.row_normalize)
    seed = cfg.seeds[0]
    params, _ = train_supervised(ds, replace(cfg.train, seed=seed))
    pseudo = predict_pseudo_labels(params, ds)
    w_sur = linearized_weights(params)

    rng = np.random.default_rng(derive_seed(seed, STREAM_TASK + 1))
    n = min(cfg.eval_targets, ds.splits.test.size)
    targets = np.sort(rng.choice(ds.splits.test, size=n, replace=False))
    perturbations = [
        nettack_lite(ds, w_sur, int(t), cfg.attack, int(pseudo.labels[t]))
        for t in targets
    ]
    doc = perturbations_to_json(
        perturbations,
        dataset=ds.name,
        model_checksum=params_checksum(params),
        mode=cfg.attack.mode,
        n_perturb=cfg.attack.n_perturb,
        seed=seed,
    )
    out = Path(args.out or f"{cfg.name}.attacks.json")
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"cached {len(perturbations)} perturbations to {out}")
    return 0


def _cmd_synth(args) -> int:
    from .synth import write_synthetic_dataset

    path = write_synthetic_dataset(
        args.out,
        num_nodes=args.nodes,
        num_classes=args.classes,
        feature_dim=args.feature_dim,
        labels_per_class=args.labels_per_class,
        seed=args.seed,
        name=args.name,
    )
    print(f"wrote synthetic dataset to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssgcn",
        description="GCN training on citation graphs with self-supervised "
        "auxiliary tasks and evasion-attack robustness evaluation",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a seed sweep from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--out-dir", default=".")
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("report", help="aggregate CSV rows into a table and figure")
    p_rep.add_argument("csvs", nargs="+")
    p_rep.add_argument("--out", default="report")
    p_rep.set_defaults(func=_cmd_report)

    p_att = sub.add_parser(
        "attack-cache", help="precompute and cache evaluation perturbations"
    )
    p_att.add_argument("--config", required=True)
    p_att.add_argument("--out", default=None)
    p_att.set_defaults(func=_cmd_attack_cache)

    p_syn = sub.add_parser("synth", help="write a synthetic citation-style dataset")
    p_syn.add_argument("--out", required=True)
    p_syn.add_argument("--nodes", type=int, default=400)
    p_syn.add_argument("--classes", type=int, default=4)
    p_syn.add_argument("--feature-dim", type=int, default=80)
    p_syn.add_argument("--labels-per-class", type=int, default=10)
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.add_argument("--name", default="synth")
    p_syn.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
