"""Multilevel k-way graph partitioning.

Pipeline:
  1. coarsen with heavy-edge matching until the graph is small,
     aggregating node and edge weights on contraction;
  2. greedy region growing for the initial partition on the coarsest
     graph, followed by a rebalance pass that restores the size cap;
  3. project back level by level, rebalancing and then refining with
     greedy boundary moves (single-node Fiduccia-Mattheyses style) that
     only ever accept cut-reducing moves which keep the balance cap and
     never empty a part.

The balance constraint is k * max_part_weight / total_weight <= 1 + eps.
Node weights are the number of original vertices inside a coarse node,
so the cap projected to any level bounds the final part sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import SparseGraph, build_csr


class PartitionError(ValueError):
    """Infeasible partitioning request (e.g. balance cannot be met)."""


@dataclass
class PartitionConfig:
    k: int
    epsilon: float = 0.05
    refinement_passes: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise PartitionError("k must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise PartitionError("epsilon must be in (0, 1)")


def edgecut(g: SparseGraph, labels: np.ndarray) -> float:
    """Total weight of edges whose endpoints carry different labels."""
    labels = np.asarray(labels)
    rows = np.repeat(np.arange(g.num_nodes), g.degrees())
    crossing = labels[rows] != labels[g.col_indices]
    return float(g.edge_weights[crossing].sum()) / 2.0


def balance_factor(labels: np.ndarray, k: int, node_weights=None) -> float:
    """k * max_k weight(part k) / total weight."""
    labels = np.asarray(labels)
    if node_weights is None:
        node_weights = np.ones(labels.size)
    part_w = np.bincount(labels, weights=node_weights, minlength=k)
    return float(k * part_w.max() / node_weights.sum())


def _coarsen_once(g: SparseGraph, node_weights: np.ndarray, rng: np.random.Generator):
    """One heavy-edge-matching contraction. Returns (graph, weights, mapping)."""
    n = g.num_nodes
    match = np.full(n, -1, dtype=np.int64)
    for v in rng.permutation(n):
        if match[v] >= 0:
            continue
        nbrs = g.neighbors(v)
        wts = g.neighbor_weights(v)
        best, best_w = -1, -1.0
        for u, w in zip(nbrs, wts):
            if match[u] < 0 and u != v and w > best_w:
                best, best_w = int(u), float(w)
        if best >= 0:
            match[v] = best
            match[best] = v
        else:
            match[v] = v  # stays a singleton

    mapping = np.full(n, -1, dtype=np.int64)
    next_id = 0
    for v in range(n):
        if mapping[v] >= 0:
            continue
        mapping[v] = next_id
        if match[v] != v:
            mapping[match[v]] = next_id
        next_id += 1

    coarse_weights = np.zeros(next_id)
    np.add.at(coarse_weights, mapping, node_weights)

    rows = np.repeat(np.arange(n), g.degrees())
    ci = mapping[rows]
    cj = mapping[g.col_indices]
    keep = (ci < cj)  # one direction is enough; build_csr symmetrizes
    coarse = build_csr(
        np.stack([ci[keep], cj[keep]], axis=1),
        next_id,
        weights=g.edge_weights[keep],
    )
    return coarse, coarse_weights, mapping


def _region_growing(
    g: SparseGraph, node_weights: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    """Grow k regions by greedy BFS, each up to roughly total/k weight."""
    n = g.num_nodes
    labels = np.full(n, -1, dtype=np.int64)
    target = node_weights.sum() / k
    degrees = g.degrees()
    unassigned = n

    for part in range(k):
        if unassigned == 0:
            break
        remaining_parts = k - part - 1
        # seed at the lowest-degree unassigned node (ties: lowest index)
        free = np.flatnonzero(labels < 0)
        seed = int(free[degrees[free].argmin()])
        labels[seed] = part
        unassigned -= 1
        region_w = node_weights[seed]
        gain = np.zeros(n)  # connection weight into the region
        for u, w in zip(g.neighbors(seed), g.neighbor_weights(seed)):
            gain[u] += w

        while region_w < target and unassigned > remaining_parts:
            frontier = np.flatnonzero((labels < 0) & (gain > 0))
            if frontier.size == 0:
                # disconnected remainder: jump to another component
                free = np.flatnonzero(labels < 0)
                nxt = int(free[degrees[free].argmin()])
            else:
                nxt = int(frontier[gain[frontier].argmax()])
            labels[nxt] = part
            unassigned -= 1
            region_w += node_weights[nxt]
            for u, w in zip(g.neighbors(nxt), g.neighbor_weights(nxt)):
                gain[u] += w

    labels[labels < 0] = k - 1
    return labels


def _connection_weights(g: SparseGraph, labels: np.ndarray, v: int, k: int) -> np.ndarray:
    conn = np.zeros(k)
    lo, hi = g.row_offsets[v], g.row_offsets[v + 1]
    np.add.at(conn, labels[g.col_indices[lo:hi]], g.edge_weights[lo:hi])
    return conn


def _rebalance(
    g: SparseGraph,
    labels: np.ndarray,
    node_weights: np.ndarray,
    k: int,
    cap: float,
) -> None:
    """Move nodes out of overweight parts until every part fits the cap.

    Prefers boundary nodes that damage the cut least. May increase the
    cut; refinement runs afterwards. With unit node weights this always
    terminates balanced, on coarse levels a single oversized node may
    remain (handled by the caller relaxing the cap).
    """
    part_w = np.bincount(labels, weights=node_weights, minlength=k).astype(float)
    part_n = np.bincount(labels, minlength=k)
    while True:
        heavy = int(part_w.argmax())
        if part_w[heavy] <= cap:
            return
        if part_n[heavy] <= 1:
            return  # single unsplittable node
        members = np.flatnonzero(labels == heavy)
        best_move, best_cost = None, None
        for v in members:
            conn = _connection_weights(g, labels, v, k)
            room = part_w + node_weights[v] <= cap
            room[heavy] = False
            if not room.any():
                continue
            dests = np.flatnonzero(room)
            dest = int(dests[conn[dests].argmax()])
            cost = conn[heavy] - conn[dest]  # cut increase if moved
            if best_cost is None or cost < best_cost:
                best_move, best_cost = (int(v), dest), cost
        if best_move is None:
            # no destination has room (lumpy coarse weights): push to the
            # lightest part, but only if that strictly lowers the maximum
            # part weight, which guarantees termination
            light = int(part_w.argmin())
            conn_best = None
            for v in members:
                if part_w[light] + node_weights[v] >= part_w[heavy]:
                    continue
                conn = _connection_weights(g, labels, v, k)
                cost = conn[heavy] - conn[light]
                if conn_best is None or cost < conn_best:
                    best_move, conn_best = (int(v), light), cost
            if best_move is None:
                return
        v, dest = best_move
        labels[v] = dest
        part_w[heavy] -= node_weights[v]
        part_w[dest] += node_weights[v]
        part_n[heavy] -= 1
        part_n[dest] += 1


def _refine(
    g: SparseGraph,
    labels: np.ndarray,
    node_weights: np.ndarray,
    k: int,
    cap: float,
    passes: int,
) -> int:
    """Greedy boundary refinement. Returns the number of accepted moves.

    Every accepted move strictly reduces the edgecut, keeps every part
    weight within the cap and never empties a part, so the cut is
    monotone non-increasing and balance is preserved throughout.
    """
    part_w = np.bincount(labels, weights=node_weights, minlength=k).astype(float)
    part_n = np.bincount(labels, minlength=k)
    total_moves = 0
    for _ in range(passes):
        moved = 0
        rows = np.repeat(np.arange(g.num_nodes), g.degrees())
        boundary = np.unique(rows[labels[rows] != labels[g.col_indices]])
        for v in boundary:
            own = labels[v]
            if part_n[own] <= 1:
                continue
            conn = _connection_weights(g, labels, v, k)
            allowed = part_w + node_weights[v] <= cap
            allowed[own] = False
            if not allowed.any():
                continue
            dests = np.flatnonzero(allowed)
            dest = int(dests[conn[dests].argmax()])
            gain = conn[dest] - conn[own]
            if gain <= 0:
                continue
            labels[v] = dest
            part_w[own] -= node_weights[v]
            part_w[dest] += node_weights[v]
            part_n[own] -= 1
            part_n[dest] += 1
            moved += 1
            assert part_w[dest] <= cap + 1e-9, "balance violated by accepted move"
        total_moves += moved
        if moved == 0:
            break
    return total_moves


def partition_graph(g: SparseGraph, cfg: PartitionConfig) -> np.ndarray:
    """Partition nodes into cfg.k parts, minimizing edgecut under balance.

    Returns a label per node. Parts are nonempty, disjoint by
    construction and cover all nodes; the result satisfies
    k * max_part_size / num_nodes <= 1 + epsilon.
    """
    n = g.num_nodes
    k = cfg.k
    if k > n:
        raise PartitionError(f"k={k} exceeds {n} nodes")
    # pigeonhole: the largest part has at least ceil(n/k) nodes
    if k * int(np.ceil(n / k)) > (1.0 + cfg.epsilon) * n:
        raise PartitionError(
            f"balance constraint infeasible: k={k}, n={n}, eps={cfg.epsilon}"
        )
    if k == 1:
        return np.zeros(n, dtype=np.int64)
    if k == n:
        return np.arange(n, dtype=np.int64)

    rng = np.random.default_rng(cfg.seed)
    cap = (1.0 + cfg.epsilon) * n / k

    # ---- coarsening phase
    levels: list[tuple[SparseGraph, np.ndarray, np.ndarray]] = []
    cur_g, cur_w = g, np.ones(n)
    coarse_target = max(30 * k, 200)
    while cur_g.num_nodes > coarse_target:
        coarse, weights, mapping = _coarsen_once(cur_g, cur_w, rng)
        if coarse.num_nodes > 0.95 * cur_g.num_nodes:
            break  # matching stalled
        levels.append((cur_g, cur_w, mapping))
        cur_g, cur_w = coarse, weights

    # ---- initial partition on the coarsest graph
    labels = _region_growing(cur_g, cur_w, k, rng)
    level_cap = max(cap, float(cur_w.max()))
    _rebalance(cur_g, labels, cur_w, k, level_cap)
    _refine(cur_g, labels, cur_w, k, level_cap, cfg.refinement_passes)

    # ---- uncoarsen, rebalance, refine
    for fine_g, fine_w, mapping in reversed(levels):
        labels = labels[mapping]
        level_cap = max(cap, float(fine_w.max()))
        _rebalance(fine_g, labels, fine_w, k, level_cap)
        _refine(fine_g, labels, fine_w, k, level_cap, cfg.refinement_passes)

    # finest level has unit weights, so the exact cap is enforceable
    _rebalance(g, labels, np.ones(n), k, cap)
    _refine(g, labels, np.ones(n), k, cap, cfg.refinement_passes)

    counts = np.bincount(labels, minlength=k)
    if counts.min() == 0:
        raise PartitionError("internal error: empty part after refinement")
    if k * counts.max() > (1.0 + cfg.epsilon) * n:
        raise PartitionError("internal error: balance constraint violated")
    return labels
