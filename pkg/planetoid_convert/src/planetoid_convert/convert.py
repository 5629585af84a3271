"""Convert raw Planetoid distribution files to the dataset directory format.

Raw layout for a dataset called NAME (all pickled except test.index):

    ind.NAME.x        sparse float features of the labeled training nodes
    ind.NAME.y        one-hot labels for x
    ind.NAME.allx     features of all non-test nodes (x is its prefix)
    ind.NAME.ally     one-hot labels for allx
    ind.NAME.tx       features of the test nodes
    ind.NAME.ty       one-hot labels for tx
    ind.NAME.graph    adjacency dict {node: [neighbors]}
    ind.NAME.test.index   one test-node position per line (shuffled)

The full node ordering is allx rows followed by test nodes at the
positions named by test.index. Citeseer's raw files skip a few positions
in the test range; those nodes are kept with all-zero features and a
class-0 placeholder label, and belong to no split.

Output directory format (little-endian, bit-exact):

    meta.json      {"name", "num_nodes", "feature_dim", "num_classes"}
    edges.tsv      "i<TAB>j" per undirected edge, 0-based, i < j, unique
    features.f32   float32 row-major num_nodes x feature_dim (raw values,
                   no normalization; loaders normalize if they want to)
    labels.u16     uint16 per node
    splits.json    {"train": [...], "val": [...], "test": [...]} following
                   the conventional protocol: the first 20 * num_classes
                   nodes train, the next 500 validate, the listed test
                   nodes test.
"""

from __future__ import annotations

import json
import logging
import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

VAL_SIZE = 500
RAW_PARTS = ("x", "y", "allx", "ally", "tx", "ty", "graph", "test.index")
KNOWN_NAMES = ("cora", "citeseer", "pubmed")


class ConversionError(Exception):
    """Missing raw files or internally inconsistent shards."""


@dataclass
class RawPlanetoidBundle:
    x: sp.spmatrix
    y: np.ndarray
    allx: sp.spmatrix
    ally: np.ndarray
    tx: sp.spmatrix
    ty: np.ndarray
    graph: dict
    test_index: np.ndarray

    def validate(self) -> None:
        if self.x.shape[0] != self.y.shape[0]:
            raise ConversionError("x and y row counts differ")
        if self.allx.shape[0] != self.ally.shape[0]:
            raise ConversionError("allx and ally row counts differ")
        if self.tx.shape[0] != self.ty.shape[0]:
            raise ConversionError("tx and ty row counts differ")
        if self.x.shape[1] != self.allx.shape[1] or self.x.shape[1] != self.tx.shape[1]:
            raise ConversionError("feature dimensions of x/allx/tx differ")
        if self.y.shape[1] != self.ally.shape[1] or self.y.shape[1] != self.ty.shape[1]:
            raise ConversionError("label dimensions of y/ally/ty differ")
        if self.x.shape[0] > self.allx.shape[0]:
            raise ConversionError("x cannot have more rows than allx")
        n_all = self.allx.shape[0]
        if self.test_index.size != self.tx.shape[0]:
            raise ConversionError("test.index length does not match tx rows")
        if self.test_index.min() < n_all:
            raise ConversionError("test index overlaps non-test rows")
        if np.unique(self.test_index).size != self.test_index.size:
            raise ConversionError("duplicate entries in test.index")


def _read_pickled(path: Path):
    # the historical distribution carries python2 pickles
    with path.open("rb") as fh:
        return pickle.load(fh, encoding="latin1")


def load_raw_bundle(raw_dir, name: str) -> RawPlanetoidBundle:
    raw_dir = Path(raw_dir)
    paths = {part: raw_dir / f"ind.{name}.{part}" for part in RAW_PARTS}
    missing = [str(p) for p in paths.values() if not p.is_file()]
    if missing:
        raise ConversionError(f"missing raw files: {missing}")

    test_index = np.array(
        [int(line) for line in paths["test.index"].read_text().split()],
        dtype=np.int64,
    )
    bundle = RawPlanetoidBundle(
        x=sp.csr_matrix(_read_pickled(paths["x"])),
        y=np.asarray(_read_pickled(paths["y"])),
        allx=sp.csr_matrix(_read_pickled(paths["allx"])),
        ally=np.asarray(_read_pickled(paths["ally"])),
        tx=sp.csr_matrix(_read_pickled(paths["tx"])),
        ty=np.asarray(_read_pickled(paths["ty"])),
        graph=_read_pickled(paths["graph"]),
        test_index=test_index,
    )
    bundle.validate()
    return bundle


def _assemble(bundle: RawPlanetoidBundle):
    """Materialize features, labels and splits in the full node ordering."""
    n_all = bundle.allx.shape[0]
    sorted_test = np.sort(bundle.test_index)
    # citeseer leaves gaps in the test range; allocate the full range and
    # keep the gap nodes with zero features
    full_range = np.arange(sorted_test[0], sorted_test[-1] + 1)
    num_nodes = n_all + full_range.size
    if int(sorted_test[-1]) + 1 != num_nodes:
        raise ConversionError("test index range does not close the node ordering")

    feature_dim = bundle.allx.shape[1]
    tx_full = sp.lil_matrix((full_range.size, feature_dim), dtype=np.float32)
    tx_full[sorted_test - sorted_test[0], :] = bundle.tx
    ty_full = np.zeros((full_range.size, bundle.ty.shape[1]), dtype=bundle.ty.dtype)
    ty_full[sorted_test - sorted_test[0], :] = bundle.ty

    features = sp.vstack(
        [sp.csr_matrix(bundle.allx, dtype=np.float32), sp.csr_matrix(tx_full)]
    ).tolil()
    labels_onehot = np.vstack([bundle.ally, ty_full])

    # undo the shuffling of test rows: row test_index[i] must hold tx[i]
    features[bundle.test_index, :] = features[sorted_test, :]
    labels_onehot[bundle.test_index, :] = labels_onehot[sorted_test, :]

    labels = labels_onehot.argmax(axis=1).astype(np.int64)
    num_classes = bundle.y.shape[1]

    n_train = bundle.y.shape[0]
    idx_train = np.arange(n_train)
    idx_val = np.arange(n_train, n_train + VAL_SIZE)
    if idx_val[-1] >= n_all:
        raise ConversionError(
            f"not enough non-test nodes for the {VAL_SIZE}-node validation split"
        )
    idx_test = sorted_test
    return (
        sp.csr_matrix(features),
        labels,
        num_classes,
        num_nodes,
        idx_train,
        idx_val,
        idx_test,
    )


def _edges_from_graph(graph: dict, num_nodes: int) -> list[tuple[int, int]]:
    """Undirected closure of the adjacency dict, self-loops dropped."""
    edges = set()
    for node, nbrs in graph.items():
        i = int(node)
        if not 0 <= i < num_nodes:
            raise ConversionError(f"graph key {i} out of range")
        for j in nbrs:
            j = int(j)
            if not 0 <= j < num_nodes:
                raise ConversionError(f"graph neighbor {j} out of range")
            if i == j:
                continue
            edges.add((min(i, j), max(i, j)))
    return sorted(edges)


def convert(raw_dir, name: str, out_dir) -> Path:
    """Convert one raw bundle; returns the output directory path."""
    bundle = load_raw_bundle(raw_dir, name)
    feats, labels, num_classes, num_nodes, idx_train, idx_val, idx_test = _assemble(
        bundle
    )
    edges = _edges_from_graph(bundle.graph, num_nodes)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "name": name,
        "num_nodes": int(num_nodes),
        "feature_dim": int(feats.shape[1]),
        "num_classes": int(num_classes),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    with (out / "edges.tsv").open("w") as fh:
        for i, j in edges:
            fh.write(f"{i}\t{j}\n")
    np.ascontiguousarray(feats.toarray(), dtype="<f4").tofile(out / "features.f32")
    labels.astype("<u2").tofile(out / "labels.u16")
    (out / "splits.json").write_text(
        json.dumps(
            {
                "train": idx_train.tolist(),
                "val": idx_val.tolist(),
                "test": idx_test.tolist(),
            }
        )
        + "\n"
    )
    logger.info(
        "converted %s: %d nodes, %d edges, %d features, %d classes, "
        "splits %d/%d/%d",
        name, num_nodes, len(edges), feats.shape[1], num_classes,
        idx_train.size, idx_val.size, idx_test.size,
    )
    return out
