"""Multi-task SVM learning with auxiliary pairwise-rank supervision.

Trains a shared-plus-task-specific weight decomposition (w_t = w0 + v_t)
over several related binary classification tasks, optionally augmented
with pairwise rank constraints derived from per-instance auxiliary
scores. Two rank variants are provided: globally-consistent (rank
constraints bind w0 + v_t) and task-specific (rank constraints bind v_t
only, via an operator-valued kernel).
"""

from .data import (
    MultiTaskDataset,
    TaskDataset,
    SyntheticConfig,
    GroundTruth,
    StandardizationParams,
    DataError,
    load_dataset,
    save_dataset,
    standardize,
    apply_standardization,
    generate_synthetic,
)
from .ranking import RankPair, RankPairSet, PseudoExample, build_rank_pairs, materialize_pseudo_examples
from .kernels import KernelSpec, AugmentedPoint, base_kernel, cross_kernel, mtl_kernel_gc, mtl_kernel_ts, assemble_gram
from .qp import BoxQP, QPSolution, solve_coordinate, solve_projected_gradient_oracle, kkt_residual
from .trainer import (
    Hyperparameters,
    DualSolution,
    TrainedModel,
    PrimalEvaluation,
    assemble_dual,
    train,
    recover_linear_weights,
    primal_objective,
    save_model,
    load_model,
)
from .evaluate import (
    MetricsReport,
    GridSpec,
    predict_in_task,
    predict_out_of_task,
    auc,
    recall_fpr,
    loto_cv,
    grid_search,
)

__version__ = "0.1.0"
