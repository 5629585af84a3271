"""Comparison tables and figures over aggregate CSV rows.

The report pivots aggregate rows into a (scheme+task) x dataset table,
flags the best two means per dataset column, and renders a grouped bar
chart with error bars next to the delimited output.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

logger = logging.getLogger(__name__)

_SCHEME_LABEL = {
    "plain": "GCN",
    "pf": "P&F",
    "st": "SelfTrain",
    "mtl": "MTL",
    "advt": "AdvT",
    "advt_ss": "AdvT",
}
_TASK_LABEL = {"none": "", "clu": "Clu", "par": "Par", "comp": "Comp"}


@dataclass
class AggRow:
    name: str
    dataset: str
    scheme: str
    task: str
    n_seeds: int
    mean: float
    std: float

    @property
    def row_label(self) -> str:
        scheme = _SCHEME_LABEL.get(self.scheme, self.scheme)
        task = _TASK_LABEL.get(self.task, self.task)
        return f"{scheme}-{task}" if task else scheme


def read_agg_rows(paths) -> list[AggRow]:
    rows: list[AggRow] = []
    for path in paths:
        with Path(path).open() as fh:
            for rec in csv.DictReader(fh):
                rows.append(
                    AggRow(
                        name=rec["name"],
                        dataset=rec["dataset"],
                        scheme=rec["scheme"],
                        task=rec["task"],
                        n_seeds=int(rec["n_seeds"]),
                        mean=float(rec["mean"]),
                        std=float(rec["std"]),
                    )
                )
    return rows


def format_table(rows: list[AggRow]) -> str:
    """Markdown table, one row per (scheme, task), one column per dataset.

    The best two means in every column are flagged with ``**``.
    """
    if not rows:
        raise ValueError("no aggregate rows to report")
    datasets = sorted({r.dataset for r in rows})
    labels: list[str] = []
    for r in rows:
        if r.row_label not in labels:
            labels.append(r.row_label)
    cells: dict[tuple[str, str], AggRow] = {}
    for r in rows:
        cells[(r.row_label, r.dataset)] = r

    flagged: set[tuple[str, str]] = set()
    for d in datasets:
        col = [(cells[(l, d)].mean, l) for l in labels if (l, d) in cells]
        for _, l in sorted(col, reverse=True)[:2]:
            flagged.add((l, d))

    header = "| Scheme | " + " | ".join(datasets) + " |"
    sep = "|---" * (len(datasets) + 1) + "|"
    lines = [header, sep]
    for l in labels:
        out = [l]
        for d in datasets:
            r = cells.get((l, d))
            if r is None:
                out.append("-")
                continue
            val = f"{100 * r.mean:.2f} ± {100 * r.std:.2f}"
            out.append(f"**{val}**" if (l, d) in flagged else val)
        lines.append("| " + " | ".join(out) + " |")
    return "\n".join(lines) + "\n"


def render_figure(rows: list[AggRow], out_path) -> Path:
    """Grouped bar chart of means with std error bars, one group per row
    label, one bar per dataset."""
    datasets = sorted({r.dataset for r in rows})
    labels: list[str] = []
    for r in rows:
        if r.row_label not in labels:
            labels.append(r.row_label)
    cells = {(r.row_label, r.dataset): r for r in rows}

    width = 0.8 / max(1, len(datasets))
    fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * len(labels)), 4.0))
    for di, d in enumerate(datasets):
        xs, means, stds = [], [], []
        for li, l in enumerate(labels):
            r = cells.get((l, d))
            if r is None:
                continue
            xs.append(li + di * width)
            means.append(100 * r.mean)
            stds.append(100 * r.std)
        ax.bar(xs, means, width=width, yerr=stds, capsize=3, label=d)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(labels))])
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("accuracy (%)")
    ax.legend()
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def write_report(csv_paths, out_base) -> tuple[Path, Path]:
    """Write ``<out_base>.md`` and ``<out_base>.png``; returns both paths."""
    rows = read_agg_rows(csv_paths)
    table = format_table(rows)
    base = Path(out_base)
    md = base.with_suffix(".md")
    md.write_text(table)
    png = render_figure(rows, base.with_suffix(".png"))
    logger.info("wrote %s and %s", md, png)
    return md, png
