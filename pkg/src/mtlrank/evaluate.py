"""Prediction, metrics, leave-one-task-out cross-validation, grid search.

Out-of-task prediction scores a new task's instances with the shared
component w0 alone (task-specific components are discarded), which is
how a trained model transfers to tasks unseen at training time.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .data import DataError, MultiTaskDataset
from .kernels import KernelSpec, base_gram
from .trainer import Hyperparameters, TrainedModel, train


def _default_mu_grid() -> list[float]:
    # 1e-7, 5e-6, 1e-6, 5e-5, 1e-5, ..., 5e3, 1e3 (21 values)
    out = [1e-7]
    for k in range(-6, 4):
        # parse decimal literals: 5 * 10.0**k rounds differently for some k
        out.extend((float(f"5e{k}"), float(f"1e{k}")))
    return out


def _default_a_grid() -> list[float]:
    # 1e-6, 5e-5, 1e-5, ..., 5e3, 1e3 (19 values)
    out = [1e-6]
    for k in range(-5, 4):
        out.extend((float(f"5e{k}"), float(f"1e{k}")))
    return out


def _default_pow2_grid() -> list[float]:
    return [2.0 ** k for k in range(-10, 11)]


@dataclass(frozen=True)
class GridSpec:
    """Hyperparameter grid; defaults are the standard search ranges."""

    mu_values: tuple[float, ...] = field(default_factory=lambda: tuple(_default_mu_grid()))
    C_values: tuple[float, ...] = field(default_factory=lambda: tuple(_default_pow2_grid()))
    gamma_values: tuple[float, ...] = field(default_factory=lambda: tuple(_default_pow2_grid()))
    a_values: tuple[float, ...] = field(default_factory=lambda: tuple(_default_a_grid()))

    def __post_init__(self):
        for name in ("mu_values", "C_values", "gamma_values", "a_values"):
            object.__setattr__(self, name, tuple(getattr(self, name)))


@dataclass(frozen=True)
class MetricsReport:
    auc: float
    recall_at_threshold: float
    fpr_at_threshold: float
    detected: bool
    threshold: float


@dataclass(frozen=True)
class CVReport:
    per_task: dict[str, MetricsReport]
    mean_auc: float
    mean_recall: float
    mean_fpr: float
    detection_rate: float


# ---------------------------------------------------------------------------
# Prediction

def _cross_matrix(model: TrainedModel, X: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Base-kernel values of the masked support terms against query rows:
    k(V1, x) - expand * k(V2, x)."""
    spec = model.hyper.kernel
    sup = model.support
    if not np.any(mask):
        return np.zeros((0, X.shape[0]))
    k1 = base_gram(sup.V1[mask], X, spec)
    if np.any(sup.expand[mask]):
        k2 = base_gram(sup.V2[mask], X, spec)
        k1 = k1 - sup.expand[mask, None] * k2
    return k1


def predict_in_task_many(model: TrainedModel, task_id: str, X: np.ndarray) -> np.ndarray:
    """Scores of (w0 + v_t) . phi(x) for a task seen during training."""
    t = model.task_index(task_id)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    sup = model.support
    if len(sup) == 0:
        return np.zeros(X.shape[0])
    mask = np.ones(len(sup), dtype=bool)
    cross = _cross_matrix(model, X, mask)
    same = (sup.task_index == t).astype(float)
    if model.hyper.variant == "ts":
        coupling = sup.u / model.hyper.mu + same
    else:
        coupling = 1.0 / model.hyper.mu + same
    return (sup.coef * coupling) @ cross


def predict_in_task(model: TrainedModel, task_id: str, x: np.ndarray) -> float:
    return float(predict_in_task_many(model, task_id, np.atleast_2d(x))[0])


def predict_out_of_task_many(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Shared-component scores w0 . phi(x); rank terms contribute only
    under the globally-consistent variant."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    sup = model.support
    if len(sup) == 0:
        return np.zeros(X.shape[0])
    if model.hyper.variant == "gc":
        mask = np.ones(len(sup), dtype=bool)
    else:  # ts and mtl: w0 carries no rank terms
        mask = sup.u == 1
    cross = _cross_matrix(model, X, mask)
    return (sup.coef[mask] @ cross) / model.hyper.mu


def predict_out_of_task(model: TrainedModel, x: np.ndarray) -> float:
    return float(predict_out_of_task_many(model, np.atleast_2d(x))[0])


# ---------------------------------------------------------------------------
# Metrics

def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score+ > score-) + 1/2 P(score+ = score-)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-d and the same length")
    pos = labels == 1
    neg = labels == -1
    n_pos, n_neg = int(pos.sum()), int(neg.sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def recall_fpr(patient_scores, patient_labels, control_scores, threshold: float) -> tuple[float, float]:
    """Fraction of positive patient instances at/above the threshold, and
    fraction of control instances at/above it."""
    patient_scores = np.asarray(patient_scores, dtype=float)
    patient_labels = np.asarray(patient_labels, dtype=int)
    control_scores = np.asarray(control_scores, dtype=float)
    pos = patient_scores[patient_labels == 1]
    if pos.size == 0 or control_scores.size == 0:
        raise DataError("recall_fpr needs positive patient instances and control instances")
    recall = float(np.mean(pos >= threshold))
    fpr = float(np.mean(control_scores >= threshold))
    return recall, fpr


def _score_task_metrics(scores: np.ndarray, y: np.ndarray, threshold: float) -> MetricsReport:
    task_auc = auc(scores, y)
    recall, fpr = recall_fpr(scores, y, scores[y == -1], threshold)
    return MetricsReport(auc=task_auc, recall_at_threshold=recall, fpr_at_threshold=fpr,
                         detected=recall > 0, threshold=threshold)


def _loto_fold(dataset, held_out_id, hyper, pair_strategy, seed, tie_epsilon, tol, threshold):
    rest = dataset.drop_task(held_out_id)
    model = train(rest, hyper, pair_strategy=pair_strategy, seed=seed,
                  tie_epsilon=tie_epsilon, tol=tol)
    held = dataset.task(held_out_id)
    scores = predict_out_of_task_many(model, held.X)
    return held_out_id, _score_task_metrics(scores, held.y, threshold)


def loto_cv(dataset: MultiTaskDataset, hyper: Hyperparameters,
            pair_strategy: str = "adjacent", seed: int = 0,
            threshold: float = 0.0, tie_epsilon: float = 0.0,
            tol: float = 1e-6, jobs: int = 1) -> CVReport:
    """Leave-one-task-out: train on T-1 tasks, score the held-out task
    with the shared component only. ``detection_rate`` is the fraction
    of held-out tasks with strictly positive recall."""
    if dataset.n_tasks < 2:
        raise DataError("leave-one-task-out needs at least 2 tasks")
    args = [(dataset, tid, hyper, pair_strategy, seed, tie_epsilon, tol, threshold)
            for tid in dataset.task_ids]
    if jobs > 1:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=jobs)(delayed(_loto_fold)(*a) for a in args)
    else:
        results = [_loto_fold(*a) for a in args]
    per_task = dict(results)  # fold order == task order, merge is deterministic
    reports = [per_task[tid] for tid in dataset.task_ids]
    return CVReport(
        per_task=per_task,
        mean_auc=float(np.mean([r.auc for r in reports])),
        mean_recall=float(np.mean([r.recall_at_threshold for r in reports])),
        mean_fpr=float(np.mean([r.fpr_at_threshold for r in reports])),
        detection_rate=float(np.mean([r.detected for r in reports])),
    )


# ---------------------------------------------------------------------------
# Grid search

def _grid_cells(grid: GridSpec, variant: str, kernel_kind: str):
    gammas = grid.gamma_values if kernel_kind == "rbf" else (None,)
    a_values = grid.a_values if variant in ("gc", "ts") else (0.0,)
    return list(itertools.product(grid.mu_values, grid.C_values, gammas, a_values))


def _evaluate_cell(cell, train_set, validation_set, variant, kernel_kind,
                   pair_strategy, seed, tol):
    mu, C, gamma, a = cell
    hyper = Hyperparameters(mu=mu, C=C, a=a, variant=variant,
                            kernel=KernelSpec(kind=kernel_kind, gamma=gamma))
    model = train(train_set, hyper, pair_strategy=pair_strategy, seed=seed, tol=tol)
    scores = np.concatenate([predict_out_of_task_many(model, t.X) for t in validation_set.tasks])
    labels = np.concatenate([t.y for t in validation_set.tasks])
    return hyper, auc(scores, labels)


def grid_search(train_set: MultiTaskDataset, validation_set: MultiTaskDataset,
                grid: GridSpec, variant: str, pair_strategy: str = "adjacent",
                kernel_kind: str = "linear", seed: int = 0, tol: float = 1e-6,
                jobs: int = 1) -> tuple[Hyperparameters, list[dict]]:
    """Exhaustive search maximizing validation AUC (pooled over the
    validation tasks, scored out-of-task). gamma is skipped for linear
    kernels and ``a`` for the plain mtl variant. Ties prefer smaller C,
    then smaller a, then larger mu. Returns the winner and the full
    audit table."""
    labels = np.concatenate([t.y for t in validation_set.tasks])
    if len(set(labels.tolist())) < 2:
        raise DataError("validation set must contain both classes")
    cells = _grid_cells(grid, variant, kernel_kind)
    if not cells:
        raise DataError("empty hyperparameter grid")
    if jobs > 1:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=jobs)(
            delayed(_evaluate_cell)(c, train_set, validation_set, variant, kernel_kind,
                                    pair_strategy, seed, tol) for c in cells)
    else:
        results = [_evaluate_cell(c, train_set, validation_set, variant, kernel_kind,
                                  pair_strategy, seed, tol) for c in cells]
    table = []
    best: tuple[Hyperparameters, float] | None = None
    for hyper, score in results:
        table.append({"variant": variant, "mu": hyper.mu, "C": hyper.C, "a": hyper.a,
                      "gamma": hyper.kernel.gamma, "auc": score})
        if best is None or _prefer(hyper, score, best[0], best[1]):
            best = (hyper, score)
    return best[0], table


def _prefer(hyper: Hyperparameters, score: float,
            incumbent: Hyperparameters, incumbent_score: float) -> bool:
    if score != incumbent_score:
        return score > incumbent_score
    if hyper.C != incumbent.C:
        return hyper.C < incumbent.C
    if hyper.a != incumbent.a:
        return hyper.a < incumbent.a
    return hyper.mu > incumbent.mu
