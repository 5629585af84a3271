"""Dataset directory loading, saving and split management.

Directory layout (all multi-byte values little-endian):

    meta.json     {"name": str, "num_nodes": int, "feature_dim": int,
                   "num_classes": int}
    edges.tsv     one undirected edge per line, "i<TAB>j", 0-based,
                  i < j, no duplicates
    features.f32  float32, row-major, num_nodes x feature_dim
    labels.u16    uint16, num_nodes entries in [0, num_classes)
    splits.json   {"train": [...], "val": [...], "test": [...]}
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import SparseGraph, build_csr

logger = logging.getLogger(__name__)

_META_KEYS = ("name", "num_nodes", "feature_dim", "num_classes")


class DatasetError(Exception):
    """Malformed or inconsistent dataset directory."""


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint train/val/test node index sets."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=np.int64)
            )
        sets = [set(self.train.tolist()), set(self.val.tolist()), set(self.test.tolist())]
        if (
            len(sets[0] & sets[1]) or len(sets[0] & sets[2]) or len(sets[1] & sets[2])
        ):
            raise DatasetError("train/val/test splits must be pairwise disjoint")


@dataclass(frozen=True)
class Dataset:
    """Citation graph with node features, labels and transductive splits."""

    graph: SparseGraph
    features: np.ndarray
    labels: np.ndarray
    splits: SplitSpec
    num_classes: int
    name: str = "unnamed"

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def summary(self) -> str:
        return (
            f"{self.name}: {self.num_nodes} nodes, {self.graph.num_edges} edges, "
            f"{self.feature_dim} features, {self.num_classes} classes, "
            f"splits {self.splits.train.size}/{self.splits.val.size}/{self.splits.test.size}"
        )


def row_normalize_features(features: np.ndarray) -> np.ndarray:
    """Scale each row to unit sum; all-zero rows are left untouched."""
    sums = features.sum(axis=1, keepdims=True)
    safe = np.where(sums == 0, 1.0, sums)
    return (features / safe).astype(features.dtype)


def _read_edges(path: Path, num_nodes: int) -> np.ndarray:
    rows = []
    with path.open("r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 'i<TAB>j'")
            i, j = int(parts[0]), int(parts[1])
            if not (0 <= i < j < num_nodes):
                raise DatasetError(
                    f"{path}:{lineno}: edge ({i}, {j}) violates 0 <= i < j < {num_nodes}"
                )
            rows.append((i, j))
    edges = np.asarray(rows, dtype=np.int64).reshape(-1, 2)
    if edges.size:
        keys = edges[:, 0] * np.int64(num_nodes) + edges[:, 1]
        if np.unique(keys).size != keys.size:
            raise DatasetError(f"{path}: duplicate edges")
    return edges


def load_dataset(dir_path, row_normalize: bool = True) -> Dataset:
    """Load a dataset directory.

    ``row_normalize`` scales feature rows to unit sum in memory (standard
    GCN preprocessing); the on-disk payload is never modified.

    Raises
    ------
    DatasetError
        Missing files, shape mismatches between meta.json and payloads,
        malformed edges or out-of-range labels.
    """
    root = Path(dir_path)
    for fname in ("meta.json", "edges.tsv", "features.f32", "labels.u16", "splits.json"):
        if not (root / fname).is_file():
            raise DatasetError(f"missing dataset file: {root / fname}")

    meta = json.loads((root / "meta.json").read_text())
    for key in _META_KEYS:
        if key not in meta:
            raise DatasetError(f"meta.json: missing key '{key}'")
    num_nodes = int(meta["num_nodes"])
    feature_dim = int(meta["feature_dim"])
    num_classes = int(meta["num_classes"])

    raw = np.fromfile(root / "features.f32", dtype="<f4")
    if raw.size != num_nodes * feature_dim:
        raise DatasetError(
            f"features.f32 holds {raw.size} values, expected "
            f"{num_nodes} x {feature_dim}"
        )
    features = raw.reshape(num_nodes, feature_dim).astype(np.float32)
    if row_normalize:
        features = row_normalize_features(features)

    labels = np.fromfile(root / "labels.u16", dtype="<u2").astype(np.int64)
    if labels.size != num_nodes:
        raise DatasetError(f"labels.u16 holds {labels.size} entries, expected {num_nodes}")
    if labels.size and labels.max() >= num_classes:
        raise DatasetError(
            f"label {labels.max()} out of range for {num_classes} classes"
        )

    edges = _read_edges(root / "edges.tsv", num_nodes)
    graph = build_csr(edges, num_nodes)

    split_doc = json.loads((root / "splits.json").read_text())
    for key in ("train", "val", "test"):
        if key not in split_doc:
            raise DatasetError(f"splits.json: missing key '{key}'")
        idx = np.asarray(split_doc[key], dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= num_nodes):
            raise DatasetError(f"splits.json: '{key}' index out of range")
    splits = SplitSpec(
        train=split_doc["train"], val=split_doc["val"], test=split_doc["test"]
    )

    ds = Dataset(
        graph=graph,
        features=features,
        labels=labels,
        splits=splits,
        num_classes=num_classes,
        name=str(meta["name"]),
    )
    logger.info("loaded %s", ds.summary())
    return ds


def save_dataset(
    dir_path,
    *,
    name: str,
    graph: SparseGraph,
    features: np.ndarray,
    labels: np.ndarray,
    splits: SplitSpec,
    num_classes: int,
) -> Path:
    """Write a dataset directory in the bit-exact on-disk format."""
    root = Path(dir_path)
    root.mkdir(parents=True, exist_ok=True)
    features = np.ascontiguousarray(features, dtype="<f4")
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise DatasetError("labels out of range for num_classes")

    meta = {
        "name": name,
        "num_nodes": int(graph.num_nodes),
        "feature_dim": int(features.shape[1]),
        "num_classes": int(num_classes),
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")

    with (root / "edges.tsv").open("w") as fh:
        for i, j in sorted(graph.edge_set()):
            fh.write(f"{i}\t{j}\n")

    features.tofile(root / "features.f32")
    labels.astype("<u2").tofile(root / "labels.u16")
    (root / "splits.json").write_text(
        json.dumps(
            {
                "train": splits.train.tolist(),
                "val": splits.val.tolist(),
                "test": splits.test.tolist(),
            }
        )
        + "\n"
    )
    return root
