"""Synthetic citation-style datasets for tests and demos.

Real citation datasets are not redistributable with this package, so the
generator below produces graphs with the same qualitative structure:
a stochastic block model whose blocks are the classes, and sparse binary
bag-of-words features where each class has its own signature words.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset, SplitSpec, save_dataset
from .graph import build_csr


def synthetic_citations(
    num_nodes: int = 400,
    num_classes: int = 4,
    feature_dim: int = 80,
    labels_per_class: int = 10,
    val_size: int = 60,
    test_size: int = 200,
    intra_degree: float = 4.0,
    inter_degree: float = 1.0,
    signal_rate: float = 0.3,
    noise_rate: float = 0.02,
    seed: int = 0,
    name: str = "synth",
) -> Dataset:
    """Generate a block-model citation graph with class-correlated words."""
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(num_nodes) % num_classes).astype(np.int64)

    group = num_nodes / num_classes
    p_in = min(1.0, intra_degree / group)
    p_out = min(1.0, inter_degree / max(1, num_nodes - group))
    # sample block-model edges without materializing all O(n^2) pairs:
    # draw a binomial count per block pair, then that many random pairs
    by_class = [np.flatnonzero(labels == c) for c in range(num_classes)]
    edges = []
    for a in range(num_classes):
        for b in range(a, num_classes):
            na, nb = by_class[a].size, by_class[b].size
            pairs = na * (na - 1) // 2 if a == b else na * nb
            p = p_in if a == b else p_out
            count = rng.binomial(pairs, p)
            if count == 0:
                continue
            i = by_class[a][rng.integers(na, size=2 * count)]
            j = by_class[b][rng.integers(nb, size=2 * count)]
            keep = i != j
            edges.append(np.stack([i[keep], j[keep]], axis=1)[:count])
    all_edges = np.concatenate(edges) if edges else np.zeros((0, 2), dtype=np.int64)
    graph = build_csr(all_edges, num_nodes)

    words_per_class = feature_dim // num_classes
    features = (rng.random((num_nodes, feature_dim)) < noise_rate).astype(np.float32)
    for c in range(num_classes):
        rows = np.flatnonzero(labels == c)
        cols = slice(c * words_per_class, (c + 1) * words_per_class)
        features[rows, cols] = (
            rng.random((rows.size, words_per_class)) < signal_rate
        ).astype(np.float32)

    order = rng.permutation(num_nodes)
    train: list[int] = []
    per_class = {c: 0 for c in range(num_classes)}
    for v in order:
        c = int(labels[v])
        if per_class[c] < labels_per_class:
            per_class[c] += 1
            train.append(int(v))
    rest = np.array([v for v in order if v not in set(train)], dtype=np.int64)
    splits = SplitSpec(
        train=np.sort(np.array(train, dtype=np.int64)),
        val=np.sort(rest[:val_size]),
        test=np.sort(rest[val_size : val_size + test_size]),
    )
    return Dataset(
        graph=graph,
        features=features,
        labels=labels,
        splits=splits,
        num_classes=num_classes,
        name=name,
    )


def write_synthetic_dataset(out_dir, **kwargs) -> str:
    """Generate and write a synthetic dataset directory; returns the path."""
    ds = synthetic_citations(**kwargs)
    save_dataset(
        out_dir,
        name=ds.name,
        graph=ds.graph,
        features=ds.features,
        labels=ds.labels,
        splits=ds.splits,
        num_classes=ds.num_classes,
    )
    return str(out_dir)
