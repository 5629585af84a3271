import numpy as np
import pytest

from ssgcn.graph import build_csr, normalize_adjacency
from ssgcn.nn import (
    AdamState,
    GcnParams,
    TrainConfig,
    adam_step,
    gcn_backward,
    gcn_extract,
    gcn_forward,
    glorot_init,
    grad_check,
    head_logits,
    init_adam_state,
    load_params,
    mse_loss,
    save_params,
    softmax_cross_entropy,
)


def random_instance(seed, n=6, nf=5, hidden=4, classes=3, dtype=np.float64):
    rng = np.random.default_rng(seed)
    edges = [(int(rng.integers(n)), int(rng.integers(n))) for _ in range(2 * n)]
    g = build_csr(edges, n)
    adj = normalize_adjacency(g)
    x = rng.normal(size=(n, nf)).astype(dtype)
    params = GcnParams(
        w0=rng.normal(size=(nf, hidden)).astype(dtype),
        head_target=rng.normal(size=(hidden, classes)).astype(dtype),
    )
    labels = rng.integers(classes, size=n)
    return adj, x, params, labels


class TestGlorotInit:
    def test_deterministic_per_seed(self):
        a = glorot_init(2, 2, seed=13)
        b = glorot_init(2, 2, seed=13)
        np.testing.assert_array_equal(a, b)

    def test_bound(self):
        w = glorot_init(100, 100, seed=0)
        assert np.abs(w).max() <= np.sqrt(6.0 / 200.0)

    def test_different_seeds_differ(self):
        assert not np.array_equal(glorot_init(3, 5, seed=1), glorot_init(3, 5, seed=2))


class TestForward:
    def test_zero_input_gives_zero_logits(self):
        adj, x, params, _ = random_instance(0)
        z, _ = gcn_forward(np.zeros_like(x), adj, params)
        np.testing.assert_allclose(z, 0.0)

    def test_scalar_chain(self):
        adj = normalize_adjacency(build_csr([], 1))  # A_hat = [[1]]
        params = GcnParams(w0=np.array([[1.0]]), head_target=np.array([[3.0]]))
        z, _ = gcn_forward(np.array([[2.0]]), adj, params)
        np.testing.assert_allclose(z, [[6.0]])

    def test_matches_dense_oracle(self):
        # independently coded dense evaluation of the two-layer model
        adj, x, params, _ = random_instance(42)
        a = adj.to_dense()
        oracle = a @ np.maximum(a @ x @ params.w0, 0.0) @ params.head_target
        z, _ = gcn_forward(x, adj, params)
        np.testing.assert_allclose(z, oracle, rtol=1e-5, atol=1e-12)

    def test_shape_mismatch(self):
        adj, x, params, _ = random_instance(1)
        with pytest.raises(ValueError):
            gcn_forward(x[:, :2], adj, params)


class TestSoftmaxCrossEntropy:
    def test_peaked_logits_loss_vanishes(self):
        z = np.array([[100.0, 0.0], [0.0, 100.0]])
        loss, _ = softmax_cross_entropy(z, np.array([0, 1]), np.array([0, 1]))
        assert loss < 1e-8

    def test_uniform_logits_equal_log_c(self):
        for c in (2, 3, 7):
            z = np.zeros((4, c))
            loss, _ = softmax_cross_entropy(z, np.zeros(4, dtype=int), np.arange(4))
            assert loss == pytest.approx(np.log(c), abs=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        z = rng.normal(size=(4, 3))
        labels = rng.integers(3, size=4)
        node_set = np.array([0, 2, 3])
        _, dz = softmax_cross_entropy(z, labels, node_set)
        h = 1e-6
        for i in range(4):
            for j in range(3):
                zp, zm = z.copy(), z.copy()
                zp[i, j] += h
                zm[i, j] -= h
                lp, _ = softmax_cross_entropy(zp, labels, node_set)
                lm, _ = softmax_cross_entropy(zm, labels, node_set)
                num = (lp - lm) / (2 * h)
                denom = max(abs(num), abs(dz[i, j]), 1e-12)
                assert abs(num - dz[i, j]) / denom < 1e-6 or abs(num - dz[i, j]) < 1e-9

    def test_rows_outside_node_set_have_zero_grad(self):
        z = np.random.default_rng(0).normal(size=(4, 3))
        _, dz = softmax_cross_entropy(z, np.array([0, 1, 2, 0]), np.array([1]))
        assert np.all(dz[[0, 2, 3]] == 0)

    def test_empty_node_set_rejected(self):
        with pytest.raises(ValueError):
            softmax_cross_entropy(np.zeros((2, 2)), np.zeros(2, dtype=int), np.array([]))


class TestMseLoss:
    def test_exact_match_is_zero(self):
        z = np.ones((3, 2))
        loss, dz = mse_loss(z, z[[0, 1]], np.array([0, 1]))
        assert loss == 0.0
        np.testing.assert_allclose(dz, 0.0)

    def test_single_entry_hand_value(self):
        loss, dz = mse_loss(np.array([[2.0]]), np.array([[0.0]]), np.array([0]))
        assert loss == 4.0
        assert dz[0, 0] == 4.0

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        z = rng.normal(size=(5, 3))
        y = rng.normal(size=(2, 3))
        node_set = np.array([1, 4])
        _, dz = mse_loss(z, y, node_set)
        h = 1e-6
        for i in node_set:
            for j in range(3):
                zp, zm = z.copy(), z.copy()
                zp[i, j] += h
                zm[i, j] -= h
                lp, _ = mse_loss(zp, y, node_set)
                lm, _ = mse_loss(zm, y, node_set)
                num = (lp - lm) / (2 * h)
                assert abs(num - dz[i, j]) / max(abs(num), 1e-12) < 1e-6


class TestBackward:
    def test_zero_dz_gives_zero_grads(self):
        adj, x, params, _ = random_instance(2)
        z, cache = gcn_forward(x, adj, params)
        grads = gcn_backward(cache, np.zeros_like(z), params)
        np.testing.assert_allclose(grads["w0"], 0.0)
        np.testing.assert_allclose(grads["head_target"], 0.0)

    def test_scalar_chain_hand_gradients(self):
        adj = normalize_adjacency(build_csr([], 1))
        params = GcnParams(w0=np.array([[1.0]]), head_target=np.array([[3.0]]))
        _, cache = gcn_forward(np.array([[2.0]]), adj, params)
        grads = gcn_backward(cache, np.array([[1.0]]), params)
        # d(loss)/d(head) = hidden = 2; d(loss)/d(w0) = x * head = 6
        np.testing.assert_allclose(grads["head_target"], [[2.0]])
        np.testing.assert_allclose(grads["w0"], [[6.0]])

    def test_full_model_finite_differences(self):
        adj, x, params, labels = random_instance(3)
        node_set = np.arange(4)

        def loss_fn(p):
            z, _ = gcn_forward(x, adj, GcnParams(p["w0"], p["head_target"]))
            return softmax_cross_entropy(z, labels, node_set)[0]

        z, cache = gcn_forward(x, adj, params)
        _, dz = softmax_cross_entropy(z, labels, node_set)
        analytic = gcn_backward(cache, dz, params)
        report = grad_check(loss_fn, params.as_dict(), analytic)
        assert report.max_rel_error < 1e-5

    def test_dual_head_w0_gradients_sum(self):
        rng = np.random.default_rng(8)
        adj, x, params, labels = random_instance(4)
        params.head_ss = rng.normal(size=(4, 2))
        cache = gcn_extract(x, adj, params.w0)
        z_t = head_logits(cache, params.head_target)
        z_s = head_logits(cache, params.head_ss)
        _, dz_t = softmax_cross_entropy(z_t, labels, np.arange(6))
        _, dz_s = mse_loss(z_s, rng.normal(size=(6, 2)), np.arange(6))
        g_t = gcn_backward(cache, dz_t, params, head="target")
        g_s = gcn_backward(cache, dz_s, params, head="ss")
        combined = g_t["w0"] + g_s["w0"]

        def loss_fn(p):
            c = gcn_extract(x, adj, p["w0"])
            lt = softmax_cross_entropy(
                head_logits(c, p["head_target"]), labels, np.arange(6)
            )[0]
            ls = mse_loss(head_logits(c, p["head_ss"]), loss_targets, np.arange(6))[0]
            return lt + ls

        loss_targets = mse_targets = None
        # regenerate the same mse targets used above
        rng2 = np.random.default_rng(8)
        _ = rng2.normal(size=(4, 2))  # head_ss draw
        loss_targets = rng2.normal(size=(6, 2))
        analytic = {"w0": combined, "head_target": g_t["head_target"], "head_ss": g_s["head_ss"]}
        report = grad_check(loss_fn, params.as_dict(), analytic)
        assert report.max_rel_error < 1e-5


class TestAdam:
    def test_zero_gradients_leave_params_unchanged(self):
        params = {"w0": np.ones((2, 2))}
        state = init_adam_state(params)
        before = params["w0"].copy()
        adam_step(params, {"w0": np.zeros((2, 2))}, state, learning_rate=0.1)
        np.testing.assert_array_equal(params["w0"], before)

    def test_first_step_magnitude_is_learning_rate(self):
        params = {"w0": np.zeros((3, 3))}
        state = init_adam_state(params)
        g = np.full((3, 3), 0.37)
        adam_step(params, {"w0": g}, state, learning_rate=0.01)
        np.testing.assert_allclose(np.abs(params["w0"]), 0.01, rtol=1e-6)

    def test_five_step_scalar_matches_reference(self):
        # independent plain-python Adam on a scalar sequence
        lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
        grads = [0.3, -0.2, 0.9, 0.05, -0.4]
        p_ref, m, v = 1.0, 0.0, 0.0
        for t, g in enumerate(grads, start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            mhat = m / (1 - b1**t)
            vhat = v / (1 - b2**t)
            p_ref -= lr * mhat / (vhat**0.5 + eps)

        params = {"w0": np.array([[1.0]])}
        state = init_adam_state(params)
        for g in grads:
            adam_step(params, {"w0": np.array([[g]])}, state, learning_rate=lr)
        assert params["w0"][0, 0] == pytest.approx(p_ref, abs=1e-12)

    def test_weight_decay_only_on_decay_keys(self):
        params = {"w0": np.ones((1, 1)), "head_target": np.ones((1, 1))}
        state = init_adam_state(params)
        grads = {"w0": np.zeros((1, 1)), "head_target": np.zeros((1, 1))}
        adam_step(params, grads, state, learning_rate=0.1, weight_decay=0.01)
        assert params["head_target"][0, 0] == 1.0
        assert params["w0"][0, 0] != 1.0


class TestGradCheck:
    def test_pure_linear_model(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(5, 3))
        w = rng.normal(size=(3, 2))
        c = rng.normal(size=(5, 2))

        def loss_fn(p):
            return float(((x @ p["w"]) * c).sum())

        analytic = {"w": x.T @ c}
        report = grad_check(loss_fn, {"w": w}, analytic, h=1e-3)
        assert report.max_rel_error < 1e-9

    def test_corrupted_gradient_detected(self):
        x = np.ones((2, 2))
        w = np.ones((2, 1))

        def loss_fn(p):
            return float((x @ p["w"]).sum())

        analytic = {"w": x.T @ np.ones((2, 1)) + 0.5}  # deliberately wrong
        report = grad_check(loss_fn, {"w": w}, analytic)
        assert report.max_rel_error > 1e-5


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(dropout=1.0)
        with pytest.raises(ValueError):
            TrainConfig(alpha_ssl=-0.1)
        cfg = TrainConfig()
        assert cfg.hidden_dim == 64 and cfg.patience == 50


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        params = GcnParams(
            w0=glorot_init(4, 3, seed=0),
            head_target=glorot_init(3, 2, seed=1),
            head_ss=glorot_init(3, 5, seed=2),
        )
        save_params(params, tmp_path / "ckpt", config={"hidden_dim": 3})
        loaded = load_params(tmp_path / "ckpt")
        np.testing.assert_array_equal(loaded.w0, params.w0)
        np.testing.assert_array_equal(loaded.head_target, params.head_target)
        np.testing.assert_array_equal(loaded.head_ss, params.head_ss)

    def test_round_trip_without_aux_head(self, tmp_path):
        params = GcnParams(w0=glorot_init(2, 2, seed=0), head_target=glorot_init(2, 2, seed=1))
        save_params(params, tmp_path / "ckpt")
        assert load_params(tmp_path / "ckpt").head_ss is None
