"""Single-node direct evasion attacks, adversarial training and
robustness evaluation.

The attacker scores flips against a linearized two-layer model
z = A_hat^2 @ X @ W (ReLU dropped), where W is the product of the
attacked model's trained weights. Each greedy round scores every
candidate flip by the decrease of the target's classification margin
(pseudo-label logit minus best competing logit), applies the best one
and renormalizes the graph incrementally. All margin updates are exact:
an edge flip (t, u) rescales rows and columns t and u of the normalized
adjacency through the two degree changes, and the scorer accounts for
every affected term rather than approximating.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .graph import NormalizedAdjacency, SparseGraph, build_csr, normalize_adjacency, spmm
from .nn import GcnParams, TrainConfig
from .schemes import (
    STREAM_ATTACK_SETS,
    STREAM_PSEUDO_MODEL,
    STREAM_TASK,
    AdvBatch,
    RunResult,
    _train_loop,
    derive_seed,
    train_supervised,
)
from .graph import spmm as _spmm
from .nn import gcn_extract, head_logits
from .partition import PartitionConfig
from .ssl_tasks import SslTask, graph_completion, graph_partition, node_clustering

logger = logging.getLogger(__name__)

ATTACK_MODES = ("links", "feats", "links_and_feats")


@dataclass
class AttackConfig:
    """Attack family and budget, plus training-time knobs."""

    mode: str = "links_and_feats"
    n_perturb: int = 2
    candidate_edges: np.ndarray | None = None     # restrict flip partners
    candidate_features: np.ndarray | None = None  # restrict feature indices
    regen_period: int = 20
    n_attack: int | None = None
    n_clean: int | None = None

    def __post_init__(self):
        if self.mode not in ATTACK_MODES:
            raise ValueError(f"unknown attack mode '{self.mode}'")
        if self.n_perturb < 0:
            raise ValueError("n_perturb must be >= 0")
        if self.regen_period < 1:
            raise ValueError("regen_period must be >= 1")


@dataclass
class Perturbation:
    """Edge and feature flips incident to a single target node."""

    target: int
    edge_flips: list[tuple[int, int]] = field(default_factory=list)
    feature_flips: list[tuple[int, int]] = field(default_factory=list)

    def size(self) -> int:
        return len(self.edge_flips) + len(self.feature_flips)

    def validate(self, n_perturb: int) -> None:
        if self.size() > n_perturb:
            raise ValueError("perturbation exceeds its flip budget")
        for i, j in self.edge_flips:
            if self.target not in (i, j):
                raise ValueError("edge flip not incident to the target")
        for t, _ in self.feature_flips:
            if t != self.target:
                raise ValueError("feature flip not on the target row")


@dataclass
class PseudoLabels:
    """True labels on the labeled set, model predictions elsewhere."""

    labels: np.ndarray
    labeled_idx: np.ndarray


def fit_pseudo_labels(ds: Dataset, cfg: TrainConfig) -> PseudoLabels:
    """Train a plain model and keep its argmax predictions as labels for
    every unlabeled node."""
    params, _ = train_supervised(ds, cfg)
    return predict_pseudo_labels(params, ds)


def predict_pseudo_labels(params: GcnParams, ds: Dataset) -> PseudoLabels:
    adj = normalize_adjacency(ds.graph)
    cache = gcn_extract(ds.features, adj, params.w0)
    pred = head_logits(cache, params.head_target).argmax(axis=1).astype(np.int64)
    train_idx = np.asarray(ds.splits.train, dtype=np.int64)
    pred[train_idx] = ds.labels[train_idx]
    return PseudoLabels(labels=pred, labeled_idx=train_idx)


def sample_attack_sets(
    unlabeled: np.ndarray, n_clean: int, n_attack: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw two disjoint uniform subsets of the unlabeled pool."""
    unlabeled = np.asarray(unlabeled, dtype=np.int64)
    if n_clean + n_attack > unlabeled.size:
        raise ValueError(
            f"cannot draw {n_clean}+{n_attack} nodes from a pool of {unlabeled.size}"
        )
    perm = np.random.default_rng(seed).permutation(unlabeled)
    v_clean = np.sort(perm[:n_clean])
    v_attack = np.sort(perm[n_clean : n_clean + n_attack])
    return v_clean, v_attack


def linearized_weights(params: GcnParams) -> np.ndarray:
    """ReLU-free collapse of the two layers into one weight matrix."""
    return params.w0.astype(np.float64) @ params.head_target.astype(np.float64)


def fit_surrogate(
    ds: Dataset,
    seed: int = 0,
    epochs: int = 200,
    learning_rate: float = 0.01,
    weight_decay: float = 5e-4,
) -> np.ndarray:
    """Train the attack surrogate: a linear model z = A_hat^2 @ X @ W
    fitted with cross-entropy on the labeled set.

    Perturbations found against this surrogate transfer to any model
    trained on the same data, which is how victims are evaluated.
    """
    from .nn import adam_step, init_adam_state, softmax_cross_entropy

    adj = normalize_adjacency(ds.graph)
    feats = spmm(adj, spmm(adj, ds.features.astype(np.float64)))
    train_idx = np.asarray(ds.splits.train, dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 97]))
    limit = np.sqrt(6.0 / (feats.shape[1] + ds.num_classes))
    w = rng.uniform(-limit, limit, size=(feats.shape[1], ds.num_classes))
    params = {"w": w}
    state = init_adam_state(params)
    for _ in range(epochs):
        z = feats @ params["w"]
        _, dz = softmax_cross_entropy(z, ds.labels, train_idx)
        grads = {"w": feats.T @ dz}
        adam_step(params, grads, state, learning_rate, weight_decay, decay_keys=("w",))
    return params["w"]


def _toggled(value: float) -> float:
    # binary bag-of-words semantics: present -> absent, absent -> present
    return 1.0 if value == 0 else 0.0


class _SurrogateScorer:
    """Shared read-only pieces of the linearized model for one attack round
    generation: adjacency structure, self-loop degrees and X @ W."""

    def __init__(self, graph: SparseGraph, x: np.ndarray, w: np.ndarray):
        self.graph = graph
        self.n = graph.num_nodes
        self.adj_csr = graph.to_scipy().astype(np.float64)
        self.deg = graph.degrees().astype(np.float64) + 1.0  # degrees of A + I
        self.w = np.asarray(w, dtype=np.float64)
        self.x = x
        self.p = np.asarray(x, dtype=np.float64) @ self.w


class _TargetState:
    """One target's incrementally perturbed view of the graph."""

    def __init__(self, scorer: _SurrogateScorer, target: int, pseudo_label: int):
        self.ctx = scorer
        self.t = int(target)
        self.y = int(pseudo_label)
        self.deg = scorer.deg.copy()
        self.s = 1.0 / np.sqrt(self.deg)
        base = scorer.graph.neighbors(self.t)
        self.partners: set[int] = set(int(u) for u in base)
        # net deviations from the base graph / base feature row; a second
        # toggle of the same edge or feature cancels the first
        self.toggled_partners: set[int] = set()
        self.toggled_features: set[int] = set()
        self.x_row = np.asarray(scorer.x[self.t], dtype=np.float64).copy()
        self.p_row = self.x_row @ scorer.w

    @property
    def edge_flips(self) -> list[tuple[int, int]]:
        t = self.t
        return [(min(t, u), max(t, u)) for u in sorted(self.toggled_partners)]

    @property
    def feature_flips(self) -> list[tuple[int, int]]:
        return [(self.t, f) for f in sorted(self.toggled_features)]

    # -- current quantities -------------------------------------------------

    def _q(self) -> np.ndarray:
        """q[j] = sum_k B[j,k] s_k P[k] for the current state, where B is
        the flipped adjacency plus identity."""
        v = self.s[:, None] * self.ctx.p
        v[self.t] = self.s[self.t] * self.p_row
        q = self.ctx.adj_csr @ v + v
        for u in self.toggled_partners:
            sign = 1.0 if u in self.partners else -1.0
            q[self.t] += sign * v[u]
            q[u] += sign * v[self.t]
        return q

    def _round_terms(self):
        t = self.t
        s2 = self.s * self.s
        j0 = np.sort(np.fromiter(self.partners, dtype=np.int64, count=len(self.partners)))
        q = self._q()
        sq = s2[t] * q[t]
        if j0.size:
            sq = sq + (s2[j0][:, None] * q[j0]).sum(axis=0)
        sw = s2[t] + s2[j0].sum()
        z_now = self.s[t] * sq
        return j0, s2, q, sq, sw, z_now

    def _margin(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        best_other = np.where(
            np.arange(z.shape[1])[None, :] == self.y, -np.inf, z
        ).max(axis=1)
        return z[:, self.y] - best_other

    def current_margin(self) -> float:
        _, _, _, _, _, z_now = self._round_terms()
        return float(self._margin(z_now)[0])

    # -- candidate scoring ---------------------------------------------------

    def edge_candidates(self, pool: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
        """Margins after each single edge flip (t, u), exactly.

        Returns (candidate partner array, margin array).
        """
        t = self.t
        j0, s2, q, sq, sw, _ = self._round_terms()
        cand = np.arange(self.ctx.n) if pool is None else np.asarray(pool, dtype=np.int64)
        cand = cand[cand != t]
        if cand.size == 0:
            return cand, np.zeros(0)

        in_j = np.isin(cand, j0)
        sign = np.where(in_j, -1.0, 1.0)
        new_deg_t = self.deg[t] + sign
        new_deg_u = self.deg[cand] + sign
        s_t_new = 1.0 / np.sqrt(new_deg_t)
        s_u_new = 1.0 / np.sqrt(new_deg_u)
        d_t = s_t_new - self.s[t]
        d_u = s_u_new - self.s[cand]

        # bu[u] = sum_{j in J} s2_j B[j, u] with J = N(t) + {t}
        bu = np.zeros(self.ctx.n)
        rows = np.concatenate([j0, [t]])
        a = self.ctx.adj_csr
        for j in rows:
            lo, hi = a.indptr[j], a.indptr[j + 1]
            bu[a.indices[lo:hi]] += s2[j]
            bu[j] += s2[j]  # identity part
        for u in self.toggled_partners:
            sgn = 1.0 if u in self.partners else -1.0
            # row t is in J; row u contributes only when u is a neighbor
            bu[u] += sgn * s2[t]
            if u in self.partners:
                bu[t] += sgn * s2[u]

        p_t = self.p_row
        p_u = self.ctx.p[cand]
        q_t = q[t]
        q_u = q[cand]
        s2_t = s2[t]
        s2_u = s2[cand]
        in_jf = in_j.astype(np.float64)

        rest = (
            sq[None, :]
            - s2_t * q_t[None, :]
            - in_jf[:, None] * s2_u[:, None] * q_u
            + (d_t * (sw - s2_t - in_jf * s2_u))[:, None] * p_t[None, :]
            + (d_u * (bu[cand] - in_jf * (s2_t + s2_u)))[:, None] * p_u
        )
        q_t_new = (
            q_t[None, :]
            + d_t[:, None] * p_t[None, :]
            + (in_jf * d_u)[:, None] * p_u
            + (sign * s_u_new)[:, None] * p_u
        )
        term_t = (s_t_new * s_t_new)[:, None] * q_t_new
        q_u_new = q_u + d_u[:, None] * p_u + s_t_new[:, None] * p_t[None, :]
        term_u = ((1.0 - in_jf) * s_u_new * s_u_new)[:, None] * q_u_new

        z_new = s_t_new[:, None] * (rest + term_t + term_u)
        return cand, self._margin(z_new)

    def feature_candidates(self, pool: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
        """Margins after each single feature toggle on the target row."""
        t = self.t
        _, s2, _, sq, sw, z_now = self._round_terms()
        num_feat = self.x_row.size
        cand = (
            np.arange(num_feat)
            if pool is None
            else np.asarray(pool, dtype=np.int64)
        )
        if cand.size == 0:
            return cand, np.zeros(0)
        a2_tt = s2[t] * sw  # (A_hat^2)[t, t]
        old = self.x_row[cand]
        delta = np.where(old == 0, 1.0, -old)
        z_new = z_now[None, :] + a2_tt * delta[:, None] * self.ctx.w[cand]
        return cand, self._margin(z_new)

    # -- applying flips -------------------------------------------------------

    def apply_edge_flip(self, u: int) -> None:
        t = self.t
        u = int(u)
        sign = -1.0 if u in self.partners else 1.0
        if u in self.partners:
            self.partners.remove(u)
        else:
            self.partners.add(u)
        self.toggled_partners.symmetric_difference_update({u})
        self.deg[t] += sign
        self.deg[u] += sign
        self.s[t] = 1.0 / math.sqrt(self.deg[t])
        self.s[u] = 1.0 / math.sqrt(self.deg[u])

    def apply_feature_flip(self, f: int) -> None:
        f = int(f)
        self.x_row[f] = _toggled(self.x_row[f])
        self.toggled_features.symmetric_difference_update({f})
        self.p_row = self.x_row @ self.ctx.w

    def normalized_dense(self) -> np.ndarray:
        """Materialize the incrementally renormalized adjacency (tests)."""
        b = self.ctx.adj_csr.toarray()
        for u in self.toggled_partners:
            val = 1.0 if u in self.partners else 0.0
            b[self.t, u] = b[u, self.t] = val
        np.fill_diagonal(b, 1.0)
        return self.s[:, None] * b * self.s[None, :]


def _attack_with_scorer(
    scorer: _SurrogateScorer, target: int, pseudo_label: int, atk: AttackConfig
) -> Perturbation:
    state = _TargetState(scorer, target, pseudo_label)
    for _ in range(atk.n_perturb):
        margin_now = state.current_margin()
        best_margin, best_flip = margin_now, None
        if atk.mode in ("links", "links_and_feats"):
            cand, margins = state.edge_candidates(atk.candidate_edges)
            if cand.size:
                i = int(margins.argmin())
                if margins[i] < best_margin:
                    best_margin, best_flip = float(margins[i]), ("edge", int(cand[i]))
        if atk.mode in ("feats", "links_and_feats"):
            cand, margins = state.feature_candidates(atk.candidate_features)
            if cand.size:
                i = int(margins.argmin())
                if margins[i] < best_margin:
                    best_margin, best_flip = float(margins[i]), ("feat", int(cand[i]))
        if best_flip is None:
            break  # no margin-decreasing candidate left
        kind, idx = best_flip
        if kind == "edge":
            state.apply_edge_flip(idx)
        else:
            state.apply_feature_flip(idx)
    pert = Perturbation(
        target=int(target),
        edge_flips=state.edge_flips,
        feature_flips=state.feature_flips,
    )
    pert.validate(atk.n_perturb)
    return pert


def nettack_lite(
    ds: Dataset,
    surrogate_w: np.ndarray,
    target: int,
    atk: AttackConfig,
    pseudo_label: int,
) -> Perturbation:
    """Greedy budgeted attack on a single target node.

    Scores every candidate edge flip incident to the target (link modes)
    and every feature toggle on the target row (feature modes) by the
    decrease in the surrogate margin of ``pseudo_label`` against the best
    other class, applying the best flip each round. Stops early when no
    flip decreases the margin.
    """
    scorer = _SurrogateScorer(ds.graph, ds.features, surrogate_w)
    return _attack_with_scorer(scorer, target, pseudo_label, atk)


def _merge_perturbations(
    graph: SparseGraph, features: np.ndarray, perturbations, dedupe: bool = False
) -> tuple[np.ndarray, SparseGraph]:
    """Merge per-target flips into one perturbed (X, A).

    Two adjacent attacked nodes can both choose their shared edge; both
    flips point the same way because both attackers saw the same base
    graph. With ``dedupe`` (the training-time merge) such duplicates are
    applied once; otherwise they are an error, since toggling twice
    would silently undo the flip.
    """
    targets = [p.target for p in perturbations]
    if len(set(targets)) != len(targets):
        raise ValueError("perturbations must have distinct targets")
    edges = graph.edge_set()
    seen: set[tuple[int, int]] = set()
    duplicates = 0
    for p in perturbations:
        for i, j in p.edge_flips:
            key = (min(i, j), max(i, j))
            if key in seen:
                if not dedupe:
                    raise ValueError(f"conflicting duplicate edge flip {key}")
                duplicates += 1
                continue
            seen.add(key)
            if key in edges:
                edges.remove(key)
            else:
                edges.add(key)
    if duplicates:
        logger.debug("deduplicated %d shared edge flips", duplicates)
    x_new = features.copy()
    for p in perturbations:
        for t, f in p.feature_flips:
            x_new[t, f] = _toggled(x_new[t, f])
    graph_new = build_csr(sorted(edges), graph.num_nodes)
    return x_new, graph_new


def apply_perturbations(
    ds: Dataset, perturbations
) -> tuple[np.ndarray, NormalizedAdjacency]:
    """Apply all flips to copies of the features and adjacency, then
    re-symmetrize and renormalize from scratch."""
    x_new, graph_new = _merge_perturbations(ds.graph, ds.features, perturbations)
    return x_new, normalize_adjacency(graph_new)


class GraphAdversary:
    """Regenerates merged perturbations against the current model during
    adversarial training; optionally rebuilds an auxiliary task from the
    perturbed inputs."""

    def __init__(
        self,
        ds: Dataset,
        atk: AttackConfig,
        pseudo: PseudoLabels,
        v_attack: np.ndarray,
        v_clean: np.ndarray,
        task_kind: str | None = None,
        task_k: int | None = None,
        task_epsilon: float = 0.05,
        task_mask_fraction: float = 0.1,
        task_seed: int = 0,
    ):
        self.ds = ds
        self.atk = atk
        self.pseudo = pseudo
        self.v_attack = np.asarray(v_attack, dtype=np.int64)
        self.v_clean = np.asarray(v_clean, dtype=np.int64)
        self.node_set = np.union1d(self.v_attack, self.v_clean)
        self.task_kind = task_kind
        self.task_k = task_k if task_k is not None else ds.num_classes
        self.task_epsilon = task_epsilon
        self.task_mask_fraction = task_mask_fraction
        self.task_seed = task_seed
        self.regen_period = atk.regen_period
        if task_kind is None:
            self.ss_output_dim = None
        elif task_kind == "completion":
            self.ss_output_dim = ds.feature_dim
        else:
            self.ss_output_dim = self.task_k

    def _build_task(self, x: np.ndarray, graph: SparseGraph) -> SslTask:
        if self.task_kind == "clustering":
            return node_clustering(x, self.task_k, seed=self.task_seed)
        if self.task_kind == "partitioning":
            return graph_partition(
                graph,
                PartitionConfig(
                    k=self.task_k, epsilon=self.task_epsilon, seed=self.task_seed
                ),
            )
        if self.task_kind == "completion":
            return graph_completion(x, self.task_mask_fraction, seed=self.task_seed)
        raise ValueError(f"unknown task kind '{self.task_kind}'")

    def regenerate(self, params: GcnParams, epoch: int) -> AdvBatch:
        w_sur = linearized_weights(params)
        scorer = _SurrogateScorer(self.ds.graph, self.ds.features, w_sur)
        perturbations = [
            _attack_with_scorer(scorer, int(t), int(self.pseudo.labels[t]), self.atk)
            for t in self.v_attack
        ]
        x_new, graph_new = _merge_perturbations(
            self.ds.graph, self.ds.features, perturbations, dedupe=True
        )
        adj_new = normalize_adjacency(graph_new)
        task = self._build_task(x_new, graph_new) if self.task_kind else None
        logger.debug(
            "regenerated %d perturbations at epoch %d", len(perturbations), epoch
        )
        return AdvBatch(
            x=x_new.astype(self.ds.features.dtype),
            adj=adj_new,
            node_set=self.node_set,
            pseudo_labels=self.pseudo.labels,
            task=task,
        )


def _attack_pool(ds: Dataset) -> np.ndarray:
    """Unlabeled nodes eligible for training-time attacks.

    The pool is everything outside the labeled set (the transductive
    setting exposes all node inputs anyway; attacked nodes train against
    pseudo-labels, never their true labels). Validation nodes are held
    out because early stopping reads them."""
    reserved = set(ds.splits.train.tolist()) | set(ds.splits.val.tolist())
    return np.array([v for v in range(ds.num_nodes) if v not in reserved], dtype=np.int64)


def _default_set_size(pool_size: int) -> int:
    return min(500, pool_size // 10)


def adversarial_train(
    ds: Dataset, cfg: TrainConfig, atk: AttackConfig
) -> tuple[GcnParams, RunResult]:
    """Supervised loss plus pseudo-label recovery on attacked inputs.

    With a zero adversarial weight this reduces exactly to plain
    supervised training under the same seed.
    """
    if cfg.alpha_adv == 0:
        return _train_loop(ds, cfg)
    return _adversarial_train_impl(ds, cfg, atk, task_kind=None)


def adversarial_train_ss(
    ds: Dataset,
    task_kind: str,
    cfg: TrainConfig,
    atk: AttackConfig,
    task_k: int | None = None,
    task_epsilon: float = 0.05,
    task_mask_fraction: float = 0.1,
) -> tuple[GcnParams, RunResult]:
    """Adversarial training with an auxiliary task rebuilt from the
    perturbed inputs at every regeneration.

    With a zero auxiliary weight this reduces exactly to plain
    adversarial training under the same seed.
    """
    if cfg.alpha_ssl == 0:
        return adversarial_train(ds, cfg, atk)
    if cfg.alpha_adv == 0:
        return _train_loop(ds, cfg)
    return _adversarial_train_impl(
        ds,
        cfg,
        atk,
        task_kind=task_kind,
        task_k=task_k,
        task_epsilon=task_epsilon,
        task_mask_fraction=task_mask_fraction,
    )


def _adversarial_train_impl(
    ds: Dataset,
    cfg: TrainConfig,
    atk: AttackConfig,
    task_kind: str | None,
    task_k: int | None = None,
    task_epsilon: float = 0.05,
    task_mask_fraction: float = 0.1,
) -> tuple[GcnParams, RunResult]:
    pseudo_cfg = replace(cfg, seed=derive_seed(cfg.seed, STREAM_PSEUDO_MODEL))
    pseudo = fit_pseudo_labels(ds, pseudo_cfg)
    pool = _attack_pool(ds)
    n_attack = atk.n_attack if atk.n_attack is not None else _default_set_size(pool.size)
    n_clean = atk.n_clean if atk.n_clean is not None else _default_set_size(pool.size)
    if n_attack < 1 or n_clean < 1:
        raise ValueError("attack pool too small for adversarial training")
    v_clean, v_attack = sample_attack_sets(
        pool, n_clean, n_attack, derive_seed(cfg.seed, STREAM_ATTACK_SETS)
    )
    adversary = GraphAdversary(
        ds,
        atk,
        pseudo,
        v_attack,
        v_clean,
        task_kind=task_kind,
        task_k=task_k,
        task_epsilon=task_epsilon,
        task_mask_fraction=task_mask_fraction,
        task_seed=derive_seed(cfg.seed, STREAM_TASK),
    )
    return _train_loop(ds, cfg, adversary=adversary)


def evaluate_under_attack(
    params: GcnParams,
    ds: Dataset,
    atk: AttackConfig,
    targets: np.ndarray,
    pseudo_labels: PseudoLabels | None = None,
    surrogate_w: np.ndarray | None = None,
) -> float:
    """Attack each target against the frozen model and classify it on its
    own perturbed graph; returns accuracy over the targets.

    By default the attack transfers from a surrogate trained with
    cross-entropy on the same data (seeded deterministically), so every
    victim faces the same attack process. Margins target the frozen
    model's own predictions (true labels on the labeled set) unless
    explicit pseudo-labels are given.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size == 0:
        raise ValueError("target set is empty")
    if pseudo_labels is None:
        pseudo_labels = predict_pseudo_labels(params, ds)
    w_sur = surrogate_w if surrogate_w is not None else fit_surrogate(ds)
    scorer = _SurrogateScorer(ds.graph, ds.features, w_sur)
    xw0 = ds.features @ params.w0
    correct = 0
    for t in targets:
        pert = _attack_with_scorer(scorer, int(t), int(pseudo_labels.labels[t]), atk)
        x_new, graph_new = _merge_perturbations(ds.graph, ds.features, [pert])
        adj_new = normalize_adjacency(graph_new)
        xw0_t = xw0.copy()
        xw0_t[t] = x_new[t] @ params.w0
        hidden = np.maximum(_spmm(adj_new, xw0_t), 0)
        z_t = _spmm(adj_new, hidden)[t] @ params.head_target
        correct += int(z_t.argmax() == ds.labels[t])
    return correct / targets.size


# -- perturbation caching -----------------------------------------------------


def perturbations_to_json(perturbations, **key_fields) -> dict:
    """Serializable cache document for attack replay."""
    return {
        "key": dict(key_fields),
        "perturbations": [
            {
                "target": int(p.target),
                "edge_flips": [[int(i), int(j)] for i, j in p.edge_flips],
                "feature_flips": [[int(t), int(f)] for t, f in p.feature_flips],
            }
            for p in perturbations
        ],
    }


def perturbations_from_json(doc: dict) -> list[Perturbation]:
    return [
        Perturbation(
            target=int(rec["target"]),
            edge_flips=[(int(i), int(j)) for i, j in rec["edge_flips"]],
            feature_flips=[(int(t), int(f)) for t, f in rec["feature_flips"]],
        )
        for rec in doc["perturbations"]
    ]
