"""Lloyd's k-means with k-means++ seeding, on raw feature rows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    objective: float
    n_iters: int
    objective_curve: list[float]
    reseeded: bool


def _sq_distances(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # ||x - c||^2 expanded; clip tiny negatives from cancellation
    d = (
        (x * x).sum(axis=1)[:, None]
        - 2.0 * (x @ centers.T)
        + (centers * centers).sum(axis=1)[None, :]
    )
    return np.maximum(d, 0.0)


def kmeans_plus_plus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[rng.integers(n)]
    closest = _sq_distances(x, centers[:1]).ravel()
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            # remaining points coincide with chosen centers
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest / total)
        centers[c] = x[idx]
        closest = np.minimum(closest, _sq_distances(x, centers[c : c + 1]).ravel())
    return centers


def kmeans(x, k: int, seed: int, max_iters: int = 100) -> KMeansResult:
    """Cluster rows of ``x`` into ``k`` groups with the L2 metric.

    Empty clusters are re-seeded at the point farthest from its assigned
    center, so every cluster in the result is nonempty. The objective
    (sum of squared distances to assigned centers) is recorded per
    iteration and is non-increasing between iterations without reseeds.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in [1, {n}]")
    rng = np.random.default_rng(seed)
    centers = kmeans_plus_plus_init(x, k, rng)

    labels = np.zeros(n, dtype=np.int64)
    curve: list[float] = []
    reseeded = False
    for it in range(max_iters):
        dists = _sq_distances(x, centers)
        labels = dists.argmin(axis=1)
        point_cost = dists[np.arange(n), labels]

        counts = np.bincount(labels, minlength=k)
        while (counts == 0).any():
            empty = int(np.flatnonzero(counts == 0)[0])
            # steal the farthest point, but only from a cluster that can
            # spare one, so the fix never creates a new empty cluster
            donors = counts[labels] >= 2
            far = int(np.where(donors, point_cost, -1.0).argmax())
            counts[labels[far]] -= 1
            counts[empty] += 1
            labels[far] = empty
            point_cost[far] = 0.0
            reseeded = True

        new_centers = np.zeros_like(centers)
        np.add.at(new_centers, labels, x)
        new_centers /= counts[:, None]

        curve.append(float(point_cost.sum()))
        if np.array_equal(new_centers, centers):
            break
        centers = new_centers

    objective = float(_sq_distances(x, centers)[np.arange(n), labels].sum())
    return KMeansResult(labels, centers, objective, len(curve), curve, reseeded)
