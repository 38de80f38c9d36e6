"""Dataset representation, file I/O, standardization, and synthetic generation.

A dataset is a collection of related binary classification tasks sharing
one feature space. Each task may additionally carry a per-instance
auxiliary score (a noisy confidence that the instance is positive),
which downstream modules turn into pairwise rank constraints.

File formats:
  CSV   -- header ``task_id,label,score,f0,f1,...``; the score cell may
           be empty.
  JSONL -- one object per line with keys ``task_id`` (string), ``label``
           (integer), ``score`` (number, optional), ``features`` (array).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class TaskDataset:
    """All instances of a single task, with labels and optional scores."""

    task_id: str
    X: np.ndarray          # (m, d) feature matrix
    y: np.ndarray          # (m,) labels in {-1, +1}
    scores: np.ndarray | None = None  # (m,) auxiliary label scores

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=int)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DataError(f"task {self.task_id!r}: need a non-empty (m, d) matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError(f"task {self.task_id!r}: non-finite feature value")
        if y.shape != (X.shape[0],):
            raise DataError(f"task {self.task_id!r}: {len(y)} labels for {X.shape[0]} instances")
        if not np.all(np.isin(y, (-1, 1))):
            raise DataError(f"task {self.task_id!r}: labels must be -1 or +1")
        if self.scores is not None:
            s = np.asarray(self.scores, dtype=float)
            object.__setattr__(self, "scores", s)
            if s.shape != (X.shape[0],):
                raise DataError(f"task {self.task_id!r}: {len(s)} scores for {X.shape[0]} instances")

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class MultiTaskDataset:
    """An ordered collection of tasks over a shared feature space."""

    tasks: tuple[TaskDataset, ...]

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.tasks:
            raise DataError("dataset has no tasks")
        ids = [t.task_id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise DataError(f"duplicate task ids: {ids}")
        d = self.tasks[0].d
        for t in self.tasks:
            if t.d != d:
                raise DataError(f"task {t.task_id!r} has dimension {t.d}, expected {d}")

    @property
    def d(self) -> int:
        return self.tasks[0].d

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def task_ids(self) -> list[str]:
        return [t.task_id for t in self.tasks]

    @property
    def has_scores(self) -> bool:
        return all(t.scores is not None for t in self.tasks)

    def task(self, task_id: str) -> TaskDataset:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise KeyError(f"unknown task id {task_id!r}")

    def drop_task(self, task_id: str) -> "MultiTaskDataset":
        self.task(task_id)  # raises on unknown id
        return MultiTaskDataset(tuple(t for t in self.tasks if t.task_id != task_id))


# ---------------------------------------------------------------------------
# File I/O

def _infer_format(path: str | Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("csv", "jsonl"):
            raise DataError(f"unknown format {fmt!r}")
        return fmt
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix in (".jsonl", ".json"):
        return "jsonl"
    raise DataError(f"cannot infer format from {path!r}; pass format='csv' or 'jsonl'")


def _group_records(records) -> MultiTaskDataset:
    """Group (task_id, label, score, features) tuples into tasks, keeping
    first-appearance task order and record order within each task."""
    by_task: dict[str, list] = {}
    d = None
    for lineno, task_id, label, score, feats in records:
        if d is None:
            d = len(feats)
        elif len(feats) != d:
            raise DataError(f"row {lineno}: {len(feats)} features, expected {d}")
        if label not in (-1, 1):
            raise DataError(f"row {lineno}: label {label} not in {{-1,+1}}")
        if not all(np.isfinite(feats)):
            raise DataError(f"row {lineno}: non-finite feature")
        by_task.setdefault(task_id, []).append((label, score, feats))
    if not by_task:
        raise DataError("no records in file")
    tasks = []
    for task_id, rows in by_task.items():
        labels = [r[0] for r in rows]
        scores = [r[1] for r in rows]
        feats = [r[2] for r in rows]
        have_scores = all(s is not None for s in scores)
        tasks.append(TaskDataset(
            task_id=task_id,
            X=np.array(feats, dtype=float),
            y=np.array(labels, dtype=int),
            scores=np.array(scores, dtype=float) if have_scores else None,
        ))
    return MultiTaskDataset(tuple(tasks))


def load_dataset(path: str | Path, format: str | None = None) -> MultiTaskDataset:
    """Load a multi-task dataset from a CSV or JSONL file.

    Records are grouped by task_id in first-appearance order; record
    order within a task is preserved. The feature dimension is inferred
    from the first record.
    """
    fmt = _infer_format(path, format)
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        if fmt == "csv":
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            if header[:3] != ["task_id", "label", "score"]:
                raise DataError(f"{path}: expected header task_id,label,score,f0,..., got {header[:3]}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    label = int(row[1])
                    score = float(row[2]) if row[2] != "" else None
                    feats = [float(v) for v in row[3:]]
                except (ValueError, IndexError) as exc:
                    raise DataError(f"{path} row {lineno}: {exc}") from None
                records.append((lineno, row[0], label, score, feats))
        else:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    task_id = obj["task_id"]
                    label = int(obj["label"])
                    score = obj.get("score")
                    score = float(score) if score is not None else None
                    feats = [float(v) for v in obj["features"]]
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise DataError(f"{path} row {lineno}: {exc}") from None
                records.append((lineno, task_id, label, score, feats))
    try:
        return _group_records(records)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def save_dataset(dataset: MultiTaskDataset, path: str | Path, format: str | None = None) -> None:
    """Write a dataset to CSV or JSONL; inverse of :func:`load_dataset`."""
    fmt = _infer_format(path, format)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if fmt == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["task_id", "label", "score"] + [f"f{j}" for j in range(dataset.d)])
            for t in dataset.tasks:
                for i in range(t.m):
                    score = "" if t.scores is None else repr(float(t.scores[i]))
                    writer.writerow([t.task_id, int(t.y[i]), score] + [repr(float(v)) for v in t.X[i]])
        else:
            for t in dataset.tasks:
                for i in range(t.m):
                    obj = {"task_id": t.task_id, "label": int(t.y[i]), "features": list(map(float, t.X[i]))}
                    if t.scores is not None:
                        obj["score"] = float(t.scores[i])
                    fh.write(json.dumps(obj) + "\n")


# ---------------------------------------------------------------------------
# Standardization

@dataclass(frozen=True)
class StandardizationParams:
    """Per-column mean and population stddev pooled over all tasks."""

    mean: np.ndarray
    std: np.ndarray  # entries with zero pooled stddev are stored as 0


def standardize(dataset: MultiTaskDataset) -> tuple[MultiTaskDataset, StandardizationParams]:
    """Center and scale every feature column to mean 0 / stddev 1, pooled
    over all tasks. Columns with zero stddev are centered only."""
    pooled = np.vstack([t.X for t in dataset.tasks])
    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0)  # population stddev
    params = StandardizationParams(mean=mean, std=std)
    return apply_standardization(dataset, params), params


def apply_standardization(dataset: MultiTaskDataset, params: StandardizationParams) -> MultiTaskDataset:
    """Transform a dataset with previously computed standardization params."""
    denom = np.where(params.std > 0, params.std, 1.0)
    tasks = tuple(
        replace(t, X=(t.X - params.mean) / denom) for t in dataset.tasks
    )
    return MultiTaskDataset(tasks)


# ---------------------------------------------------------------------------
# Synthetic generation

@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs for the synthetic related-tasks generator with noisy labels."""

    T: int
    m: int
    d: int
    task_spread: float = 0.3   # norm of the per-task weight perturbation
    noise_band: float = 0.5    # |margin| band inside which labels may flip
    flip_prob: float = 0.0
    score_noise: float = 0.0   # stddev of noise on the auxiliary scores
    seed: int = 0

    def __post_init__(self):
        if self.T < 1 or self.m < 1 or self.d < 1:
            raise DataError("T, m, d must be positive")
        if min(self.task_spread, self.noise_band, self.score_noise) < 0:
            raise DataError("scale parameters must be non-negative")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise DataError("flip_prob must be in [0, 1]")


@dataclass(frozen=True)
class GroundTruth:
    """True weights and labels behind a synthetic dataset."""

    w0: np.ndarray                       # shared weight, unit norm
    v: dict[str, np.ndarray]             # per-task perturbation
    true_labels: dict[str, np.ndarray]   # labels before noise flips


def generate_synthetic(config: SyntheticConfig,
                       shared_w0: np.ndarray | None = None,
                       task_prefix: str = "t") -> tuple[MultiTaskDataset, GroundTruth]:
    """Generate related tasks with margin-band label noise and a scoring oracle.

    A shared unit weight w0 is drawn (or reused via ``shared_w0``), each
    task perturbs it by a random direction of norm ``task_spread``, and
    instances are standard Gaussian. The true label is the sign of the
    task margin; observed labels flip with probability ``flip_prob``
    when the margin magnitude is below ``noise_band``. Scores are the
    true margin plus Gaussian noise. Deterministic given the seed.
    """
    rng = np.random.default_rng(config.seed)
    if shared_w0 is None:
        w0 = rng.standard_normal(config.d)
        w0 /= np.linalg.norm(w0)
    else:
        w0 = np.asarray(shared_w0, dtype=float)
        rng.standard_normal(config.d)  # keep the stream aligned with the fresh-w0 path

    tasks = []
    v_true: dict[str, np.ndarray] = {}
    y_true: dict[str, np.ndarray] = {}
    for t in range(config.T):
        task_id = f"{task_prefix}{t}"
        direction = rng.standard_normal(config.d)
        direction /= np.linalg.norm(direction)
        v = config.task_spread * direction
        wt = w0 + v
        X = rng.standard_normal((config.m, config.d))
        margin = X @ wt
        truth = np.where(margin >= 0, 1, -1)
        flips = (np.abs(margin) < config.noise_band) & (rng.random(config.m) < config.flip_prob)
        y = np.where(flips, -truth, truth)
        scores = margin + config.score_noise * rng.standard_normal(config.m)
        tasks.append(TaskDataset(task_id=task_id, X=X, y=y, scores=scores))
        v_true[task_id] = v
        y_true[task_id] = truth
    dataset = MultiTaskDataset(tuple(tasks))
    return dataset, GroundTruth(w0=w0, v=v_true, true_labels=y_true)
