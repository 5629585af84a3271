"""Sparse undirected graphs in CSR form and symmetric adjacency normalization.

The CSR container is shared by the citation graphs (all edge weights 1.0)
and by the coarsened, weighted graphs produced during multilevel
partitioning. All containers here are immutable after construction and
safe for concurrent reads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class GraphConstructionError(ValueError):
    """Raised when an edge list cannot form a valid undirected graph."""


@dataclass(frozen=True)
class SparseGraph:
    """Undirected graph stored as symmetric CSR.

    Invariants: column indices are sorted and unique within each row, the
    structure is symmetric with equal weights in both directions, and no
    self-loops are stored (normalization adds them).
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    edge_weights: np.ndarray

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return self.col_indices.size // 2

    def degrees(self) -> np.ndarray:
        """Neighbor count per node (unweighted, no self-loop)."""
        return np.diff(self.row_offsets)

    def neighbors(self, node: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[node]:self.row_offsets[node + 1]]

    def neighbor_weights(self, node: int) -> np.ndarray:
        return self.edge_weights[self.row_offsets[node]:self.row_offsets[node + 1]]

    def total_edge_weight(self) -> float:
        """Sum of undirected edge weights."""
        return float(self.edge_weights.sum()) / 2.0

    def edge_set(self) -> set[tuple[int, int]]:
        """All edges as (i, j) pairs with i < j."""
        rows = np.repeat(np.arange(self.num_nodes), self.degrees())
        mask = rows < self.col_indices
        return set(zip(rows[mask].tolist(), self.col_indices[mask].tolist()))

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.edge_weights, self.col_indices, self.row_offsets),
            shape=(self.num_nodes, self.num_nodes),
        )


def build_csr(
    edge_list,
    num_nodes: int,
    weights=None,
) -> SparseGraph:
    """Build a symmetric CSR graph from an iterable of (i, j) pairs.

    The input is symmetrized and deduplicated, and self-loops are dropped.
    Without explicit ``weights`` every surviving edge gets weight 1.0;
    with ``weights`` the entries of duplicate pairs are summed, which is
    what edge contraction during coarsening needs.

    Raises
    ------
    GraphConstructionError
        If any endpoint is outside ``[0, num_nodes)``.
    """
    if num_nodes < 0:
        raise GraphConstructionError("num_nodes must be nonnegative")
    edges = np.asarray(list(edge_list), dtype=np.int64)
    if edges.size == 0:
        edges = edges.reshape(0, 2)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise GraphConstructionError("edge list must contain (i, j) pairs")
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        raise GraphConstructionError(
            f"edge endpoint out of range for {num_nodes} nodes"
        )

    if weights is None:
        w = np.ones(len(edges), dtype=np.float64)
        aggregate = False
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (len(edges),):
            raise GraphConstructionError("weights length must match edge list")
        if w.size and w.min() < 0:
            raise GraphConstructionError("edge weights must be nonnegative")
        aggregate = True

    keep = edges[:, 0] != edges[:, 1] if edges.size else np.zeros(0, dtype=bool)
    edges, w = edges[keep], w[keep]

    # Symmetrize, then collapse duplicates on (row, col) keys.
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    vals = np.concatenate([w, w])
    keys = rows * np.int64(num_nodes) + cols
    uniq, inverse = np.unique(keys, return_inverse=True)
    if aggregate:
        merged = np.zeros(uniq.size, dtype=np.float64)
        np.add.at(merged, inverse, vals)
    else:
        merged = np.ones(uniq.size, dtype=np.float64)

    out_rows = (uniq // num_nodes).astype(np.int64)
    out_cols = (uniq % num_nodes).astype(np.int64)
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(out_rows, minlength=num_nodes), out=offsets[1:])
    return SparseGraph(num_nodes, offsets, out_cols, merged)


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetrically normalized adjacency with self-loops.

    Entry (i, j) equals (a_ij + delta_ij) / sqrt(d_i * d_j) where d are
    the degrees of the self-loop-augmented graph. Every diagonal entry is
    therefore 1/d_i and isolated nodes stay well-defined.
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    inv_sqrt_degrees: np.ndarray
    _csr: sp.csr_matrix = field(init=False, repr=False, compare=False)
    _csr32: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        csr = sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.num_nodes, self.num_nodes),
        )
        object.__setattr__(self, "_csr", csr)
        object.__setattr__(self, "_csr32", csr.astype(np.float32))

    def to_scipy(self, dtype=np.float64) -> sp.csr_matrix:
        return self._csr32 if dtype == np.float32 else self._csr

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()


def normalize_adjacency(g: SparseGraph) -> NormalizedAdjacency:
    """Add self-loops and scale symmetrically by inverse sqrt degrees."""
    a = g.to_scipy()
    b = (a + sp.identity(g.num_nodes, dtype=np.float64, format="csr")).tocsr()
    b.sort_indices()
    deg = np.asarray(b.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    scale = sp.diags(inv_sqrt)
    norm = (scale @ b @ scale).tocsr()
    norm.sort_indices()
    return NormalizedAdjacency(
        num_nodes=g.num_nodes,
        row_offsets=norm.indptr.astype(np.int64),
        col_indices=norm.indices.astype(np.int64),
        values=norm.data,
        inv_sqrt_degrees=inv_sqrt,
    )


def spmm(adj: NormalizedAdjacency, dense: np.ndarray) -> np.ndarray:
    """Sparse-dense matrix product ``adj @ dense``.

    The result dtype follows the dense operand so float32 training paths
    stay in float32.
    """
    dense = np.asarray(dense)
    if dense.ndim != 2 or dense.shape[0] != adj.num_nodes:
        raise ValueError(
            f"shape mismatch: adjacency is {adj.num_nodes}x{adj.num_nodes}, "
            f"dense operand is {dense.shape}"
        )
    return adj.to_scipy(dense.dtype) @ dense
