import numpy as np
import pytest

from ssgcn.cluster import kmeans, kmeans_plus_plus_init, _sq_distances


def plain_lloyd_oracle(x, centers, max_iters=100):
    """Independent textbook Lloyd loop from a given initialization."""
    x = np.asarray(x, dtype=np.float64)
    centers = centers.copy()
    for _ in range(max_iters):
        d = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d.argmin(axis=1)
        new = np.vstack(
            [
                x[labels == c].mean(axis=0) if np.any(labels == c) else centers[c]
                for c in range(len(centers))
            ]
        )
        if np.allclose(new, centers, rtol=0, atol=0):
            break
        centers = new
    d = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d.argmin(axis=1)
    return labels, d[np.arange(len(x)), labels].sum()


class TestKMeans:
    def test_k_equals_one(self):
        x = np.random.default_rng(0).normal(size=(10, 3))
        res = kmeans(x, 1, seed=0)
        assert set(res.labels.tolist()) == {0}

    def test_two_separated_clouds(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(12, 4)) * 0.1
        b = rng.normal(size=(12, 4)) * 0.1 + 10.0
        x = np.vstack([a, b])
        res = kmeans(x, 2, seed=3)
        la, lb = set(res.labels[:12].tolist()), set(res.labels[12:].tolist())
        assert len(la) == 1 and len(lb) == 1 and la != lb

    def test_matches_plain_lloyd_from_same_init(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(20, 3))
        init = kmeans_plus_plus_init(x, 4, np.random.default_rng(5))
        # our implementation re-derives the same seeding internally
        res = kmeans(x, 4, seed=5)
        init2 = kmeans_plus_plus_init(x, 4, np.random.default_rng(5))
        np.testing.assert_array_equal(init, init2)
        _, oracle_obj = plain_lloyd_oracle(x, init)
        assert res.objective == pytest.approx(oracle_obj, rel=1e-10)

    def test_objective_monotone_when_no_reseed(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(60, 5))
        res = kmeans(x, 5, seed=2)
        assert not res.reseeded
        curve = np.array(res.objective_curve)
        assert np.all(np.diff(curve) <= 1e-9)

    def test_clusters_nonempty_disjoint_cover(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(30, 2))
        for k in (2, 5, 9):
            res = kmeans(x, k, seed=k)
            counts = np.bincount(res.labels, minlength=k)
            assert counts.min() >= 1           # nonempty
            assert counts.sum() == 30          # disjoint cover

    def test_degenerate_duplicates_still_cover(self):
        x = np.zeros((6, 2))  # all points identical
        res = kmeans(x, 3, seed=0)
        counts = np.bincount(res.labels, minlength=3)
        assert counts.min() >= 1
        assert counts.sum() == 6

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((3, 2)), 4, seed=0)

    def test_deterministic_per_seed(self):
        x = np.random.default_rng(0).normal(size=(25, 3))
        a = kmeans(x, 3, seed=9)
        b = kmeans(x, 3, seed=9)
        np.testing.assert_array_equal(a.labels, b.labels)


def test_sq_distances_matches_naive():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(8, 3))
    c = rng.normal(size=(4, 3))
    naive = ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
    np.testing.assert_allclose(_sq_distances(x, c), naive, rtol=1e-9, atol=1e-9)
