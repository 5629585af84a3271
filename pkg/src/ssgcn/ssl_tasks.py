"""Self-supervised pseudo-label tasks consumable by any training scheme.

Each task bundles its (possibly masked) input features, pseudo-labels or
regression targets, the node set the loss averages over, and the loss
kind. The propagation matrix is always the one of the graph being
trained on, so tasks carry no adjacency of their own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cluster import kmeans
from .graph import SparseGraph
from .partition import PartitionConfig, partition_graph

CROSS_ENTROPY = "cross_entropy"
MEAN_SQUARED_ERROR = "mse"

TASK_KINDS = ("clustering", "partitioning", "completion")


@dataclass(frozen=True)
class SslTask:
    """A pseudo-labeled auxiliary task.

    ``x_override`` is None for tasks that run on the unmodified node
    features; graph completion supplies a masked copy instead.
    ``targets`` holds class indices for classification kinds and the
    original feature rows of the masked nodes for completion.
    """

    kind: str
    x_override: np.ndarray | None
    targets: np.ndarray
    node_set: np.ndarray
    loss_kind: str
    output_dim: int

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind '{self.kind}'")

    @property
    def masks_input(self) -> bool:
        return self.x_override is not None

    def task_input(self, features: np.ndarray) -> np.ndarray:
        return features if self.x_override is None else self.x_override


def node_clustering(
    features: np.ndarray, k: int, seed: int, max_iters: int = 100
) -> SslTask:
    """Cluster raw feature rows and use cluster indices as pseudo-labels.

    The resulting cluster sets are nonempty, disjoint and cover all
    nodes; the loss is cross-entropy over every node.
    """
    result = kmeans(features, k, seed=seed, max_iters=max_iters)
    return SslTask(
        kind="clustering",
        x_override=None,
        targets=result.labels,
        node_set=np.arange(features.shape[0], dtype=np.int64),
        loss_kind=CROSS_ENTROPY,
        output_dim=k,
    )


def graph_partition(g: SparseGraph, cfg: PartitionConfig) -> SslTask:
    """Partition the graph topology and use part indices as pseudo-labels."""
    labels = partition_graph(g, cfg)
    return SslTask(
        kind="partitioning",
        x_override=None,
        targets=labels,
        node_set=np.arange(g.num_nodes, dtype=np.int64),
        loss_kind=CROSS_ENTROPY,
        output_dim=cfg.k,
    )


def graph_completion(features: np.ndarray, mask_fraction: float, seed: int) -> SslTask:
    """Mask a random subset of node feature rows and regress them back.

    Masked rows are zeroed in the task input; neighbors keep their
    features, so a two-layer network sees the masked node's two-hop
    context. Targets are the original rows, compared with mean squared
    error over the masked set only.
    """
    if not 0.0 < mask_fraction <= 1.0:
        raise ValueError("mask_fraction must be in (0, 1]")
    n = features.shape[0]
    rng = np.random.default_rng(seed)
    n_masked = math.ceil(mask_fraction * n)
    masked = np.sort(rng.choice(n, size=n_masked, replace=False)).astype(np.int64)
    x_masked = features.copy()
    x_masked[masked] = 0.0
    return SslTask(
        kind="completion",
        x_override=x_masked,
        targets=features[masked].copy(),
        node_set=masked,
        loss_kind=MEAN_SQUARED_ERROR,
        output_dim=features.shape[1],
    )


def export_pseudo_labels(task: SslTask, path) -> Path:
    """Write classification pseudo-labels as a labels.u16-format sidecar."""
    if task.loss_kind != CROSS_ENTROPY:
        raise ValueError("only classification tasks export pseudo-labels")
    out = Path(path)
    np.asarray(task.targets, dtype="<u2").tofile(out)
    return out
