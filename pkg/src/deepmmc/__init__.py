"""Deep transductive semi-supervised maximum-margin clustering.

An RBM-pretrained multi-layer logistic encoder trained jointly with
multi-class max-margin cluster weights under must-link / cannot-link
pairwise constraints and a transductive hinge on unlabeled points.
"""

from .clustering import (
    ClusterWeights,
    TrainConfig,
    TrainReport,
    assign_clusters,
    best_diff_assignment,
    best_same_assignment,
    grad_h,
    grad_w,
    infer_cluster,
    init_cluster_weights,
    joint_feature,
    load_model,
    lr_schedule,
    objective,
    pair_feature,
    save_model,
    train,
    violated_sets,
)
from .constraints import (
    ConstraintSplit,
    PairwiseConstraint,
    SamplingExhaustedError,
    partition,
    read_constraints,
    sample_constraints,
    split_train_test,
    write_constraints,
)
from .datasets import DataFormatError, gaussian_blobs, load_csv, load_idx, save_csv, write_idx
from .encoder import DeepNet, EncodeTrace, apply_update, backprop, encode, from_rbm_stack
from .harness import ExperimentConfig, RunReport, run_experiment, write_report
from .metrics import adjusted_rand_index, clustering_accuracy, pairwise_scores, roc_auc
from .numeric import (
    DataMatrix,
    logistic_map,
    make_rng,
    pca_project,
    standardize_columns,
)
from .rbm import (
    PretrainConfig,
    RbmLayer,
    cd1_step,
    hidden_activation,
    pretrain_stack,
    train_rbm_layer,
    visible_reconstruction,
)

__version__ = "0.1.0"
