"""GCN training on citation graphs with self-supervised auxiliary tasks,
three incorporation schemes, and single-node evasion attack defenses."""

from .adversarial import (
    AttackConfig,
    Perturbation,
    PseudoLabels,
    adversarial_train,
    adversarial_train_ss,
    apply_perturbations,
    evaluate_under_attack,
    fit_pseudo_labels,
    nettack_lite,
    sample_attack_sets,
)
from .cluster import kmeans
from .data import Dataset, DatasetError, SplitSpec, load_dataset, save_dataset
from .graph import (
    NormalizedAdjacency,
    SparseGraph,
    build_csr,
    normalize_adjacency,
    spmm,
)
from .nn import (
    AdamState,
    ForwardCache,
    GcnParams,
    TrainConfig,
    adam_step,
    gcn_backward,
    gcn_forward,
    glorot_init,
    grad_check,
    load_params,
    mse_loss,
    save_params,
    softmax_cross_entropy,
)
from .partition import PartitionConfig, edgecut, partition_graph
from .runner import ExperimentConfig, parse_config, run
from .schemes import (
    RunResult,
    evaluate,
    pretrain_finetune,
    self_train,
    train_multitask,
    train_supervised,
)
from .ssl_tasks import (
    SslTask,
    export_pseudo_labels,
    graph_completion,
    graph_partition,
    node_clustering,
)
from .synth import synthetic_citations, write_synthetic_dataset

__version__ = "0.1.0"
