"""Two-layer GCN forward/backward, losses, Adam and gradient checking.

The model is Z = A_hat @ ReLU(A_hat @ X @ W0) @ W_head. The first
multiplication chain up to A_hat @ ReLU(...) is the shared feature
extractor; one or two linear heads sit on top of it. Backward passes are
hand-derived; nothing here needs autodiff.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import NormalizedAdjacency, spmm

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    """Hyperparameters shared by all training schemes.

    alpha_sup / alpha_ssl / alpha_adv weight the supervised, auxiliary
    self-supervised and adversarial loss terms of the joint objective.
    """

    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 400
    patience: int = 50
    hidden_dim: int = 64
    dropout: float = 0.5
    alpha_sup: float = 1.0
    alpha_ssl: float = 1.0
    alpha_adv: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.alpha_sup, self.alpha_ssl, self.alpha_adv) < 0:
            raise ValueError("loss weights must be nonnegative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.epochs < 0 or self.patience < 0:
            raise ValueError("epochs and patience must be nonnegative")


@dataclass
class GcnParams:
    """Extractor weights plus the target head and optional auxiliary head."""

    w0: np.ndarray
    head_target: np.ndarray
    head_ss: np.ndarray | None = None

    def as_dict(self) -> dict[str, np.ndarray]:
        out = {"w0": self.w0, "head_target": self.head_target}
        if self.head_ss is not None:
            out["head_ss"] = self.head_ss
        return out

    def copy(self) -> "GcnParams":
        return GcnParams(
            w0=self.w0.copy(),
            head_target=self.head_target.copy(),
            head_ss=None if self.head_ss is None else self.head_ss.copy(),
        )

    def head(self, which: str) -> np.ndarray:
        if which == "target":
            return self.head_target
        if which == "ss":
            if self.head_ss is None:
                raise ValueError("model has no auxiliary head")
            return self.head_ss
        raise ValueError(f"unknown head '{which}'")


@dataclass
class ForwardCache:
    """Intermediates kept for the backward pass."""

    x_used: np.ndarray        # input after dropout (the array W0 saw)
    pre_act: np.ndarray       # A_hat @ X @ W0
    hidden: np.ndarray        # ReLU(pre_act)
    hidden_used: np.ndarray   # hidden after dropout
    propagated: np.ndarray    # A_hat @ hidden_used
    adj: NormalizedAdjacency
    hidden_mask: np.ndarray | None = None


def glorot_init(rows: int, cols: int, seed, dtype=np.float32) -> np.ndarray:
    """Uniform(-a, a) with a = sqrt(6 / (rows + cols)), deterministic per seed."""
    if rows < 1 or cols < 1:
        raise ValueError("matrix dimensions must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols)).astype(dtype)


def make_dropout_mask(rng: np.random.Generator, shape, p: float, dtype) -> np.ndarray:
    # inverted dropout: surviving entries are scaled by 1/(1-p)
    return (rng.random(shape) >= p).astype(dtype) / dtype(1.0 - p)


def gcn_extract(
    x: np.ndarray,
    adj: NormalizedAdjacency,
    w0: np.ndarray,
    input_mask: np.ndarray | None = None,
    hidden_mask: np.ndarray | None = None,
) -> ForwardCache:
    """Run the shared feature extractor, keeping backward intermediates."""
    if x.shape[0] != adj.num_nodes:
        raise ValueError(
            f"feature rows {x.shape[0]} do not match graph size {adj.num_nodes}"
        )
    if x.shape[1] != w0.shape[0]:
        raise ValueError(
            f"feature dim {x.shape[1]} does not match W0 rows {w0.shape[0]}"
        )
    x_used = x if input_mask is None else x * input_mask
    pre_act = spmm(adj, x_used @ w0)
    hidden = np.maximum(pre_act, 0)
    hidden_used = hidden if hidden_mask is None else hidden * hidden_mask
    propagated = spmm(adj, hidden_used)
    return ForwardCache(
        x_used=x_used,
        pre_act=pre_act,
        hidden=hidden,
        hidden_used=hidden_used,
        propagated=propagated,
        adj=adj,
        hidden_mask=hidden_mask,
    )


def head_logits(cache: ForwardCache, head_weight: np.ndarray) -> np.ndarray:
    return cache.propagated @ head_weight


def gcn_forward(
    x: np.ndarray,
    adj: NormalizedAdjacency,
    params: GcnParams,
    head: str = "target",
    input_mask: np.ndarray | None = None,
    hidden_mask: np.ndarray | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Full forward pass through the extractor and one head."""
    cache = gcn_extract(x, adj, params.w0, input_mask, hidden_mask)
    return head_logits(cache, params.head(head)), cache


def gcn_backward(
    cache: ForwardCache,
    dz: np.ndarray,
    params: GcnParams,
    head: str = "target",
) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss wrt W0 and the selected head.

    ``dz`` is the loss gradient at the head output. The ReLU subgradient
    at exactly zero is zero. When two heads contribute, call once per
    head and sum the W0 gradients.
    """
    head_w = params.head(head)
    if dz.shape != (cache.propagated.shape[0], head_w.shape[1]):
        raise ValueError(
            f"dz shape {dz.shape} does not match logits "
            f"({cache.propagated.shape[0]}, {head_w.shape[1]})"
        )
    d_head = cache.propagated.T @ dz
    d_hidden_used = spmm(cache.adj, dz @ head_w.T)  # A_hat is symmetric
    d_hidden = (
        d_hidden_used if cache.hidden_mask is None else d_hidden_used * cache.hidden_mask
    )
    d_pre = d_hidden * (cache.pre_act > 0)
    d_w0 = cache.x_used.T @ spmm(cache.adj, d_pre)
    key = "head_target" if head == "target" else "head_ss"
    return {"w0": d_w0, key: d_head}


def softmax_cross_entropy(
    z: np.ndarray, labels: np.ndarray, node_set: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over ``node_set`` with softmax folded in.

    Returns the loss and its gradient wrt the full logits matrix (zero
    outside the node set).
    """
    node_set = np.asarray(node_set, dtype=np.int64)
    if node_set.size == 0:
        raise ValueError("node set for cross-entropy loss is empty")
    zs = z[node_set]
    zs = zs - zs.max(axis=1, keepdims=True)
    exp = np.exp(zs)
    probs = exp / exp.sum(axis=1, keepdims=True)
    y = np.asarray(labels)[node_set]
    picked = probs[np.arange(node_set.size), y]
    loss = float(-np.log(np.maximum(picked, np.finfo(z.dtype).tiny)).mean())
    grad_rows = probs.copy()
    grad_rows[np.arange(node_set.size), y] -= 1.0
    dz = np.zeros_like(z)
    dz[node_set] = grad_rows / node_set.size
    return loss, dz


def mse_loss(
    z: np.ndarray, targets: np.ndarray, node_set: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean squared error over ``node_set`` rows and all output dims."""
    node_set = np.asarray(node_set, dtype=np.int64)
    if node_set.size == 0:
        raise ValueError("node set for mse loss is empty")
    diff = z[node_set] - targets
    denom = diff.size
    loss = float((diff * diff).sum() / denom)
    dz = np.zeros_like(z)
    dz[node_set] = 2.0 * diff / denom
    return loss, dz


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter tensor."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS


def init_adam_state(params: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    learning_rate: float,
    weight_decay: float = 0.0,
    decay_keys=("w0",),
) -> None:
    """One in-place Adam update with bias correction.

    Weight decay enters as an L2 gradient term and is applied only to the
    tensors named in ``decay_keys`` (by default the first-layer weights).
    """
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for key, p in params.items():
        g = grads[key]
        if weight_decay and key in decay_keys:
            g = g + weight_decay * p
        m = state.m[key]
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict[str, float]

    def ok(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def grad_check(
    loss_fn,
    params: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    h: float = 1e-5,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    ``loss_fn(params)`` must be deterministic (no dropout) and is
    re-evaluated with each entry nudged by +/- h. Entries where both the
    analytic and numerical gradient are ~0 contribute no error.
    """
    per_param: dict[str, float] = {}
    for key, p in params.items():
        worst = 0.0
        flat = p.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = loss_fn(params)
            flat[idx] = orig - h
            down = loss_fn(params)
            flat[idx] = orig
            numeric = (up - down) / (2.0 * h)
            a = analytic[key].ravel()[idx]
            denom = max(abs(a), abs(numeric))
            if denom > 1e-12:
                worst = max(worst, abs(a - numeric) / denom)
        per_param[key] = worst
    return GradCheckReport(max(per_param.values(), default=0.0), per_param)


def save_params(params: GcnParams, dir_path, config: dict | None = None) -> Path:
    """Write a checkpoint: meta.json plus one little-endian .f32 blob per tensor."""
    root = Path(dir_path)
    root.mkdir(parents=True, exist_ok=True)
    tensors = params.as_dict()
    meta = {
        "tensors": {k: list(t.shape) for k, t in tensors.items()},
        "config": config or {},
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    for key, t in tensors.items():
        np.ascontiguousarray(t, dtype="<f4").tofile(root / f"{key}.f32")
    return root


def load_params(dir_path) -> GcnParams:
    root = Path(dir_path)
    meta = json.loads((root / "meta.json").read_text())
    tensors = {}
    for key, shape in meta["tensors"].items():
        blob = np.fromfile(root / f"{key}.f32", dtype="<f4")
        if blob.size != int(np.prod(shape)):
            raise ValueError(f"checkpoint blob {key}.f32 does not match meta shape")
        tensors[key] = blob.reshape(shape).astype(np.float32)
    return GcnParams(
        w0=tensors["w0"],
        head_target=tensors["head_target"],
        head_ss=tensors.get("head_ss"),
    )


def params_checksum(params: GcnParams) -> str:
    """Stable hex digest of all parameter bytes (for attack caching keys)."""
    import hashlib

    digest = hashlib.sha256()
    for key, t in sorted(params.as_dict().items()):
        digest.update(key.encode())
        digest.update(np.ascontiguousarray(t, dtype="<f8").tobytes())
    return digest.hexdigest()
