"""Training schemes: plain supervised, pretrain & finetune, self-training
and multi-task learning, plus evaluation.

All schemes run through one core loop so that degenerate settings
(auxiliary or adversarial weight zero) follow the exact same instruction
sequence as plain supervised training and reproduce it bit for bit under
a fixed seed. Randomness is split into named per-purpose streams derived
from the run seed, so the presence of one component never shifts the
random numbers another component sees.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .data import Dataset, SplitSpec
from .graph import NormalizedAdjacency, normalize_adjacency
from .nn import (
    GcnParams,
    TrainConfig,
    gcn_backward,
    gcn_extract,
    glorot_init,
    head_logits,
    init_adam_state,
    adam_step,
    make_dropout_mask,
    mse_loss,
    softmax_cross_entropy,
)
from .ssl_tasks import CROSS_ENTROPY, SslTask

logger = logging.getLogger(__name__)

# named randomness streams, all derived from the run seed
STREAM_W0 = 0
STREAM_HEAD_TARGET = 1
STREAM_HEAD_SS = 2
STREAM_DROPOUT = 3
STREAM_ATTACK_SETS = 4
STREAM_PSEUDO_MODEL = 5
STREAM_TASK = 6


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream)]))


def derive_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(stream)]).generate_state(1)[0])


@dataclass
class RunResult:
    """Outcome of one training run."""

    test_accuracy: float
    best_val_accuracy: float
    best_epoch: int
    epochs_run: int
    curves: dict[str, list[float]] = field(default_factory=dict)


@dataclass
class AdvBatch:
    """Perturbed inputs the adversarial loss trains against."""

    x: np.ndarray
    adj: NormalizedAdjacency
    node_set: np.ndarray
    pseudo_labels: np.ndarray
    task: SslTask | None = None


class TrainingAdversary(Protocol):
    """Regenerates adversarial batches against the current model."""

    regen_period: int
    ss_output_dim: int | None

    def regenerate(self, params: GcnParams, epoch: int) -> AdvBatch: ...


def accuracy_from_logits(z: np.ndarray, labels: np.ndarray, idx: np.ndarray) -> float:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cannot compute accuracy over an empty node set")
    return float((z[idx].argmax(axis=1) == np.asarray(labels)[idx]).mean())


def evaluate(params: GcnParams, ds: Dataset, split: str) -> float:
    """Fraction of split nodes whose argmax logit matches the label."""
    idx = getattr(ds.splits, split, None)
    if idx is None:
        raise ValueError(f"unknown split '{split}'")
    adj = normalize_adjacency(ds.graph)
    cache = gcn_extract(ds.features, adj, params.w0)
    z = head_logits(cache, params.head_target)
    return accuracy_from_logits(z, ds.labels, idx)


def _task_loss(task: SslTask, z: np.ndarray):
    if task.loss_kind == CROSS_ENTROPY:
        return softmax_cross_entropy(z, task.targets, task.node_set)
    return mse_loss(z, task.targets, task.node_set)


def _train_loop(
    ds: Dataset,
    cfg: TrainConfig,
    task: SslTask | None = None,
    adversary: TrainingAdversary | None = None,
    init_w0: np.ndarray | None = None,
    dtype=np.float32,
) -> tuple[GcnParams, RunResult]:
    """Shared optimization loop for every scheme.

    A clean supervised pass (the only one that sees dropout) always runs.
    The auxiliary task contributes through a second head, sharing the
    supervised extractor pass whenever the task input is unmodified. The
    adversary, when present and weighted, injects a pseudo-label
    cross-entropy on its perturbed inputs, regenerated every
    ``regen_period`` epochs against the current model. Components with a
    zero weight are skipped entirely, including their randomness.
    """
    train_idx = np.asarray(ds.splits.train, dtype=np.int64)
    if train_idx.size == 0:
        raise ValueError("training split is empty")
    x = np.ascontiguousarray(ds.features, dtype=dtype)
    adj = normalize_adjacency(ds.graph)
    n, num_feat = x.shape
    hidden = cfg.hidden_dim

    use_ssl = task is not None and cfg.alpha_ssl > 0
    use_adv = adversary is not None and cfg.alpha_adv > 0
    ss_dim = None
    if use_ssl:
        ss_dim = task.output_dim
    elif use_adv and adversary.ss_output_dim is not None and cfg.alpha_ssl > 0:
        ss_dim = adversary.ss_output_dim

    params: dict[str, np.ndarray] = {}
    if init_w0 is not None:
        params["w0"] = np.array(init_w0, dtype=dtype)
    else:
        params["w0"] = glorot_init(num_feat, hidden, stream_rng(cfg.seed, STREAM_W0), dtype)
    params["head_target"] = glorot_init(
        hidden, ds.num_classes, stream_rng(cfg.seed, STREAM_HEAD_TARGET), dtype
    )
    if ss_dim is not None:
        params["head_ss"] = glorot_init(
            hidden, ss_dim, stream_rng(cfg.seed, STREAM_HEAD_SS), dtype
        )
    adam = init_adam_state(params)
    drop_rng = stream_rng(cfg.seed, STREAM_DROPOUT)

    def snapshot() -> GcnParams:
        return GcnParams(
            w0=params["w0"].copy(),
            head_target=params["head_target"].copy(),
            head_ss=params["head_ss"].copy() if "head_ss" in params else None,
        )

    has_val = ds.splits.val.size > 0
    best_val = -1.0
    best_epoch = -1
    best_params = snapshot()
    since_best = 0
    curves: dict[str, list[float]] = {"sup": [], "val_accuracy": []}
    adv_batch: AdvBatch | None = None
    epochs_run = 0

    for epoch in range(cfg.epochs):
        epochs_run = epoch + 1
        if use_adv and epoch % adversary.regen_period == 0:
            adv_batch = adversary.regenerate(snapshot(), epoch)

        input_mask = hidden_mask = None
        if cfg.dropout > 0:
            input_mask = make_dropout_mask(drop_rng, x.shape, cfg.dropout, dtype)
            hidden_mask = make_dropout_mask(drop_rng, (n, hidden), cfg.dropout, dtype)

        cache = gcn_extract(x, adj, params["w0"], input_mask, hidden_mask)
        z = head_logits(cache, params["head_target"])
        loss_sup, dz = softmax_cross_entropy(z, ds.labels, train_idx)
        gp = GcnParams(
            w0=params["w0"],
            head_target=params["head_target"],
            head_ss=params.get("head_ss"),
        )
        grads = gcn_backward(cache, cfg.alpha_sup * dz, gp, head="target")
        curves["sup"].append(loss_sup)

        if use_ssl:
            cache_ss = (
                cache
                if not task.masks_input
                else gcn_extract(task.task_input(x), adj, params["w0"])
            )
            z_ss = head_logits(cache_ss, params["head_ss"])
            loss_ss, dz_ss = _task_loss(task, z_ss)
            g_ss = gcn_backward(cache_ss, cfg.alpha_ssl * dz_ss, gp, head="ss")
            grads["w0"] += g_ss["w0"]
            grads["head_ss"] = g_ss["head_ss"]
            curves.setdefault("ssl", []).append(loss_ss)

        if use_adv:
            cache_adv = gcn_extract(adv_batch.x, adv_batch.adj, params["w0"])
            z_adv = head_logits(cache_adv, params["head_target"])
            loss_adv, dz_adv = softmax_cross_entropy(
                z_adv, adv_batch.pseudo_labels, adv_batch.node_set
            )
            g_adv = gcn_backward(cache_adv, cfg.alpha_adv * dz_adv, gp, head="target")
            grads["w0"] += g_adv["w0"]
            grads["head_target"] += g_adv["head_target"]
            curves.setdefault("adv", []).append(loss_adv)

            if adv_batch.task is not None and cfg.alpha_ssl > 0:
                adv_task = adv_batch.task
                cache_ss = (
                    cache_adv
                    if not adv_task.masks_input
                    else gcn_extract(
                        adv_task.task_input(adv_batch.x), adv_batch.adj, params["w0"]
                    )
                )
                z_ss = head_logits(cache_ss, params["head_ss"])
                loss_ss, dz_ss = _task_loss(adv_task, z_ss)
                g_ss = gcn_backward(cache_ss, cfg.alpha_ssl * dz_ss, gp, head="ss")
                grads["w0"] += g_ss["w0"]
                grads["head_ss"] = g_ss["head_ss"]
                curves.setdefault("ssl", []).append(loss_ss)

        if "head_ss" in params and "head_ss" not in grads:
            grads["head_ss"] = np.zeros_like(params["head_ss"])
        adam_step(params, grads, adam, cfg.learning_rate, cfg.weight_decay)

        if has_val:
            eval_cache = gcn_extract(x, adj, params["w0"])
            z_eval = head_logits(eval_cache, params["head_target"])
            val_acc = accuracy_from_logits(z_eval, ds.labels, ds.splits.val)
            curves["val_accuracy"].append(val_acc)
            # ties refresh the snapshot (the latest equally-good model is
            # kept, which matters when auxiliary objectives keep learning
            # on a flat validation plateau) but do not reset patience
            if val_acc >= best_val:
                if val_acc > best_val:
                    since_best = 0
                else:
                    since_best += 1
                best_val = val_acc
                best_epoch = epoch
                best_params = snapshot()
            else:
                since_best += 1
            if since_best >= cfg.patience:
                break

    if not has_val or best_epoch < 0:
        best_params = snapshot()
        best_epoch = epochs_run - 1

    test_acc = (
        evaluate_with_adj(best_params, x, adj, ds.labels, ds.splits.test)
        if ds.splits.test.size
        else float("nan")
    )
    result = RunResult(
        test_accuracy=test_acc,
        best_val_accuracy=best_val if has_val else float("nan"),
        best_epoch=best_epoch,
        epochs_run=epochs_run,
        curves=curves,
    )
    return best_params, result


def evaluate_with_adj(
    params: GcnParams,
    x: np.ndarray,
    adj: NormalizedAdjacency,
    labels: np.ndarray,
    idx: np.ndarray,
) -> float:
    cache = gcn_extract(x, adj, params.w0)
    return accuracy_from_logits(head_logits(cache, params.head_target), labels, idx)


def train_supervised(ds: Dataset, cfg: TrainConfig) -> tuple[GcnParams, RunResult]:
    """Minimize mean cross-entropy on the labeled set, early-stopped on
    validation accuracy."""
    return _train_loop(ds, cfg)


def train_multitask(
    ds: Dataset, task: SslTask, cfg: TrainConfig
) -> tuple[GcnParams, RunResult]:
    """Jointly minimize the supervised loss and the auxiliary task loss
    through a shared extractor with separate heads."""
    return _train_loop(ds, cfg, task=task)


def pretrain_finetune(
    ds: Dataset,
    task: SslTask,
    cfg: TrainConfig,
    pretrain_epochs: int = 200,
) -> tuple[GcnParams, RunResult]:
    """Train the extractor on the auxiliary task first, then run
    supervised training from the pretrained extractor with fresh heads.

    Pretraining runs a fixed number of epochs with no dropout and no
    early stopping (pseudo-tasks carry no validation signal).
    """
    x = np.ascontiguousarray(ds.features, dtype=np.float32)
    adj = normalize_adjacency(ds.graph)
    w0 = glorot_init(
        x.shape[1], cfg.hidden_dim, stream_rng(cfg.seed, STREAM_W0), np.float32
    )
    head_ss = glorot_init(
        cfg.hidden_dim, task.output_dim, stream_rng(cfg.seed, STREAM_HEAD_SS), np.float32
    )
    stage1 = {"w0": w0, "head_ss": head_ss}
    adam = init_adam_state(stage1)
    gp = GcnParams(w0=w0, head_target=head_ss, head_ss=head_ss)
    task_x = task.task_input(x)
    pretrain_curve: list[float] = []
    for _ in range(pretrain_epochs):
        cache = gcn_extract(task_x, adj, stage1["w0"])
        z_ss = head_logits(cache, stage1["head_ss"])
        loss, dz = _task_loss(task, z_ss)
        grads = gcn_backward(cache, dz, gp, head="ss")
        adam_step(stage1, grads, adam, cfg.learning_rate, cfg.weight_decay)
        pretrain_curve.append(loss)

    params, result = _train_loop(ds, cfg, init_w0=stage1["w0"])
    result.curves["ssl_pretrain"] = pretrain_curve
    return params, result


def self_train(
    ds: Dataset,
    cfg: TrainConfig,
    stages: int = 3,
    additions_per_class: int | None = None,
) -> tuple[GcnParams, RunResult]:
    """Iteratively grow the labeled set with confident predictions.

    Each stage trains from scratch on the current labeled set, then adds
    for every class the most confident unlabeled nodes (largest logit
    margin between the predicted class and the runner-up) with their
    predicted labels. The labeled set grows monotonically and original
    labels are never overwritten. Validation and test nodes are never
    pseudo-labeled.
    """
    if stages < 0:
        raise ValueError("stages must be >= 0")
    if additions_per_class is None:
        additions_per_class = math.ceil(ds.splits.train.size / ds.num_classes)

    reserved = set(ds.splits.train.tolist()) | set(ds.splits.val.tolist()) | set(
        ds.splits.test.tolist()
    )
    pool = np.array(
        [v for v in range(ds.num_nodes) if v not in reserved], dtype=np.int64
    )
    labels_cur = ds.labels.copy()
    train_cur = np.asarray(ds.splits.train, dtype=np.int64).copy()
    adj = normalize_adjacency(ds.graph)

    params, result = None, None
    labeled_sizes: list[int] = []
    for stage in range(stages + 1):
        labeled_sizes.append(int(train_cur.size))
        ds_cur = Dataset(
            graph=ds.graph,
            features=ds.features,
            labels=labels_cur,
            splits=SplitSpec(train=train_cur, val=ds.splits.val, test=ds.splits.test),
            num_classes=ds.num_classes,
            name=ds.name,
        )
        params, result = _train_loop(ds_cur, cfg)
        if stage == stages or pool.size == 0:
            break

        cache = gcn_extract(ds.features, adj, params.w0)
        z = head_logits(cache, params.head_target)
        zp = z[pool]
        pred = zp.argmax(axis=1)
        part = np.partition(zp, -2, axis=1)
        margin = part[:, -1] - part[:, -2]

        added: list[int] = []
        for c in range(ds.num_classes):
            cand = np.flatnonzero(pred == c)
            if cand.size == 0:
                continue
            take = cand[np.argsort(-margin[cand], kind="stable")][:additions_per_class]
            for i in take:
                labels_cur[pool[i]] = c
                added.append(int(pool[i]))
        if not added:
            break
        train_cur = np.concatenate([train_cur, np.array(added, dtype=np.int64)])
        pool = np.array([v for v in pool if v not in set(added)], dtype=np.int64)
        logger.info(
            "self-training stage %d: labeled set now %d nodes", stage + 1, train_cur.size
        )

    # report test accuracy against the true labels
    result.test_accuracy = (
        evaluate(params, ds, "test") if ds.splits.test.size else float("nan")
    )
    result.curves["labeled_set_sizes"] = labeled_sizes
    return params, result
