"""Dual assembly, training, linear weight recovery, and primal diagnostics.

Three training variants share one dual shape (a box QP):

  mtl -- shared + task-specific decomposition, no rank constraints
  gc  -- rank constraints bind w0 + v_t (globally-consistent ranking)
  ts  -- rank constraints bind v_t only (task-specific ranking, via the
         operator-valued kernel)

For linear base kernels the explicit weights are recovered from the
multipliers, which also enables an independent primal objective for
duality-gap checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DataError, MultiTaskDataset
from .kernels import KernelSpec, assemble_gram, augmented_points, base_gram
from .qp import BoxQP, QPSolution, solve_coordinate
from .ranking import (
    DEFAULT_DROP_EPSILON,
    PseudoExample,
    RankPairSet,
    build_rank_pairs,
    materialize_pseudo_examples,
)

MODEL_FORMAT_VERSION = "mtl-rank/1"
SUPPORT_EPSILON = 1e-8
DEFAULT_TRAIN_TOL = 1e-8

VARIANTS = ("mtl", "gc", "ts")


@dataclass(frozen=True)
class Hyperparameters:
    """Training knobs: task coupling mu, costs C and C' = a*C, kernel, variant."""

    mu: float
    C: float
    a: float = 0.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    variant: str = "mtl"

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.a < 0:
            raise ValueError("a must be non-negative")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def C_rank(self) -> float:
        return self.a * self.C


@dataclass(frozen=True)
class DualSolution:
    """Classification (alpha) and rank (beta) multipliers plus diagnostics."""

    alpha: dict[str, np.ndarray]          # task_id -> (m_t,)
    beta: np.ndarray                      # aligned with beta_pairs
    beta_pairs: tuple[tuple[str, int, int], ...]
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class LinearWeights:
    w0: np.ndarray
    v: dict[str, np.ndarray]

    def w_task(self, task_id: str) -> np.ndarray:
        return self.w0 + self.v[task_id]


@dataclass(frozen=True)
class SupportSet:
    """Retained dual expansion terms for prediction.

    Each term carries its signed multiplier, task, instance indicator u,
    and the raw vectors needed to evaluate base-kernel values against a
    query: k(V1, x) - expand * k(V2, x). In raw-delta mode pseudo terms
    store the delta vector in V1 with expand=False.
    """

    coef: np.ndarray         # s_u * lambda_u
    u: np.ndarray            # 1 for instances, 0 for pseudo-examples
    task_index: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    expand: np.ndarray       # bool; True -> subtract k(V2, x)

    def __len__(self) -> int:
        return len(self.coef)


@dataclass(frozen=True)
class TrainedModel:
    hyper: Hyperparameters
    task_ids: tuple[str, ...]
    dual: DualSolution
    support: SupportSet
    raw_delta: bool = False
    linear_weights: LinearWeights | None = None

    def task_index(self, task_id: str) -> int:
        try:
            return self.task_ids.index(task_id)
        except ValueError:
            raise KeyError(f"unknown task id {task_id!r}") from None


@dataclass(frozen=True)
class PrimalEvaluation:
    objective: float
    xi: dict[str, np.ndarray]    # per-instance hinge slacks
    eta: np.ndarray              # per-pseudo hinge slacks


@dataclass(frozen=True)
class DualIndexMap:
    """Ordering of the dual variables: instances task-major/instance-minor,
    then pseudo-examples task-major/pair-minor."""

    points: tuple
    signs: np.ndarray
    pseudos: tuple[PseudoExample, ...]
    n_instance: int
    n_pseudo: int


def assemble_dual(dataset: MultiTaskDataset, pairs: RankPairSet | None,
                  hyper: Hyperparameters, raw_delta: bool = False,
                  drop_epsilon: float = DEFAULT_DROP_EPSILON) -> tuple[BoxQP, DualIndexMap]:
    """Build the box QP for the selected variant.

    Q[u][v] = s_u s_v K_variant(point_u, point_v) with s = y for
    instances and s = +1 for pseudo-examples; bounds are C for instance
    variables and a*C for rank variables. With a == 0 (or variant mtl)
    the rank block is dropped entirely.
    """
    if hyper.variant == "mtl" or hyper.a == 0 or pairs is None or len(pairs) == 0:
        pseudos: list[PseudoExample] = []
    else:
        pseudos = materialize_pseudo_examples(dataset, pairs, drop_epsilon)
    points = augmented_points(dataset, pseudos)
    signs = np.concatenate([
        np.concatenate([t.y.astype(float) for t in dataset.tasks]),
        np.ones(len(pseudos)),
    ])
    kernel_variant = "ts" if hyper.variant == "ts" else "gc"
    G = assemble_gram(points, kernel_variant, hyper.mu, dataset, pseudos,
                      hyper.kernel, raw_delta)
    Q = np.outer(signs, signs) * G
    n_instance = sum(t.m for t in dataset.tasks)
    upper = np.concatenate([
        np.full(n_instance, hyper.C),
        np.full(len(pseudos), hyper.C_rank),
    ])
    index_map = DualIndexMap(points=tuple(points), signs=signs, pseudos=tuple(pseudos),
                             n_instance=n_instance, n_pseudo=len(pseudos))
    return BoxQP(Q=Q, upper=upper), index_map


def _split_solution(dataset: MultiTaskDataset, index_map: DualIndexMap,
                    solution: QPSolution) -> DualSolution:
    alpha: dict[str, np.ndarray] = {}
    offset = 0
    for t in dataset.tasks:
        alpha[t.task_id] = solution.lam[offset:offset + t.m].copy()
        offset += t.m
    beta = solution.lam[index_map.n_instance:].copy()
    beta_pairs = tuple(
        (dataset.tasks[ps.task_index].task_id, ps.p, ps.q) for ps in index_map.pseudos
    )
    return DualSolution(alpha=alpha, beta=beta, beta_pairs=beta_pairs,
                        objective=solution.objective,
                        kkt_residual=solution.kkt_residual,
                        iterations=solution.iterations,
                        converged=solution.converged)


def _build_support(dataset: MultiTaskDataset, index_map: DualIndexMap,
                   lam: np.ndarray, raw_delta: bool,
                   support_epsilon: float) -> SupportSet:
    coef, u, task_index, V1, V2, expand = [], [], [], [], [], []
    d = dataset.d
    zeros = np.zeros(d)
    for value, sign, pt in zip(lam, index_map.signs, index_map.points):
        if value <= support_epsilon:
            continue
        X = dataset.tasks[pt.task_index].X
        coef.append(sign * value)
        u.append(pt.u)
        task_index.append(pt.task_index)
        if pt.kind == "instance":
            V1.append(X[pt.i])
            V2.append(zeros)
            expand.append(False)
        elif raw_delta:
            V1.append(X[pt.p] - X[pt.q])
            V2.append(zeros)
            expand.append(False)
        else:
            V1.append(X[pt.p])
            V2.append(X[pt.q])
            expand.append(True)
    shape = (len(coef), d) if coef else (0, d)
    return SupportSet(
        coef=np.array(coef, dtype=float),
        u=np.array(u, dtype=int),
        task_index=np.array(task_index, dtype=int),
        V1=np.array(V1, dtype=float).reshape(shape),
        V2=np.array(V2, dtype=float).reshape(shape),
        expand=np.array(expand, dtype=bool),
    )


def train(dataset: MultiTaskDataset, hyper: Hyperparameters,
          pair_strategy: str = "adjacent", seed: int = 0,
          tie_epsilon: float = 0.0, tol: float = DEFAULT_TRAIN_TOL,
          max_sweeps: int | None = None, raw_delta: bool = False,
          support_epsilon: float = SUPPORT_EPSILON) -> TrainedModel:
    """Train one model: build rank pairs (gc/ts), assemble and solve the
    dual, retain support terms, and recover explicit weights for linear
    kernels. Non-convergence is surfaced on the returned model rather
    than raised."""
    pairs = None
    if hyper.variant in ("gc", "ts") and hyper.a > 0:
        if not dataset.has_scores:
            raise DataError(f"variant {hyper.variant!r} requires auxiliary scores on every task")
        pairs = build_rank_pairs(dataset, pair_strategy, tie_epsilon, seed)
    qp, index_map = assemble_dual(dataset, pairs, hyper, raw_delta)
    solution = solve_coordinate(qp, tol=tol, max_sweeps=max_sweeps)
    dual = _split_solution(dataset, index_map, solution)
    support = _build_support(dataset, index_map, solution.lam, raw_delta, support_epsilon)
    weights = None
    if hyper.kernel.is_linear:
        weights = recover_linear_weights(dual, dataset, list(index_map.pseudos), hyper)
    return TrainedModel(hyper=hyper, task_ids=tuple(dataset.task_ids), dual=dual,
                        support=support, raw_delta=raw_delta, linear_weights=weights)


def recover_linear_weights(dual: DualSolution, dataset: MultiTaskDataset,
                           pseudos: list[PseudoExample],
                           hyper: Hyperparameters) -> LinearWeights:
    """Explicit weights from the multipliers (linear kernels only).

    gc:  w0 = (1/mu) [sum alpha*y*x + sum beta*z*delta]
    ts:  w0 = (1/mu)  sum alpha*y*x           (rank terms excluded)
    all: v_t = own-task alpha*y*x + own-task beta*z*delta
    """
    if not hyper.kernel.is_linear:
        raise ValueError("weight recovery requires a linear kernel")
    d = dataset.d
    w0 = np.zeros(d)
    v = {t.task_id: np.zeros(d) for t in dataset.tasks}
    for task in dataset.tasks:
        contrib = (dual.alpha[task.task_id] * task.y) @ task.X
        w0 += contrib
        v[task.task_id] += contrib
    for b, ps in zip(dual.beta, pseudos):
        task_id = dataset.tasks[ps.task_index].task_id
        term = b * ps.z * ps.delta
        v[task_id] += term
        if hyper.variant != "ts":
            w0 += term
    return LinearWeights(w0=w0 / hyper.mu, v=v)


def primal_objective(weights: LinearWeights, dataset: MultiTaskDataset,
                     pseudos: list[PseudoExample],
                     hyper: Hyperparameters) -> PrimalEvaluation:
    """Primal value 1/2 sum ||v_t||^2 + mu/2 ||w0||^2 + C sum xi + C' sum eta
    with hinge slacks from the explicit weights. The rank margin uses
    w0 + v_t for gc and v_t alone for ts."""
    reg = 0.5 * sum(float(vt @ vt) for vt in weights.v.values())
    reg += 0.5 * hyper.mu * float(weights.w0 @ weights.w0)
    xi: dict[str, np.ndarray] = {}
    total_xi = 0.0
    for task in dataset.tasks:
        margins = task.y * (task.X @ weights.w_task(task.task_id))
        slack = np.maximum(0.0, 1.0 - margins)
        xi[task.task_id] = slack
        total_xi += float(slack.sum())
    eta = np.zeros(len(pseudos))
    for j, ps in enumerate(pseudos):
        task_id = dataset.tasks[ps.task_index].task_id
        w_rank = weights.v[task_id] if hyper.variant == "ts" else weights.w_task(task_id)
        eta[j] = max(0.0, 1.0 - ps.z * float(w_rank @ ps.delta))
    objective = reg + hyper.C * total_xi + hyper.C_rank * float(eta.sum())
    return PrimalEvaluation(objective=objective, xi=xi, eta=eta)


# ---------------------------------------------------------------------------
# Model serialization ("mtl-rank/1": JSON document, floats round-trip exactly)

def _arr(a: np.ndarray) -> list:
    return np.asarray(a, dtype=float).tolist()


def model_to_dict(model: TrainedModel) -> dict:
    h = model.hyper
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "hyper": {
            "mu": h.mu, "C": h.C, "a": h.a, "variant": h.variant,
            "kernel": {"kind": h.kernel.kind, "gamma": h.kernel.gamma},
        },
        "task_ids": list(model.task_ids),
        "raw_delta": model.raw_delta,
        "dual": {
            "alpha": {tid: _arr(a) for tid, a in model.dual.alpha.items()},
            "beta": _arr(model.dual.beta),
            "beta_pairs": [list(p) for p in model.dual.beta_pairs],
            "objective": model.dual.objective,
            "kkt_residual": model.dual.kkt_residual,
            "iterations": model.dual.iterations,
            "converged": model.dual.converged,
        },
        "support": {
            "coef": _arr(model.support.coef),
            "u": model.support.u.tolist(),
            "task_index": model.support.task_index.tolist(),
            "V1": _arr(model.support.V1),
            "V2": _arr(model.support.V2),
            "expand": model.support.expand.tolist(),
        },
        "linear_weights": None,
    }
    if model.linear_weights is not None:
        doc["linear_weights"] = {
            "w0": _arr(model.linear_weights.w0),
            "v": {tid: _arr(vt) for tid, vt in model.linear_weights.v.items()},
        }
    return doc


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise DataError(f"unsupported model version {doc.get('version')!r}")
    h = doc["hyper"]
    hyper = Hyperparameters(mu=h["mu"], C=h["C"], a=h["a"], variant=h["variant"],
                            kernel=KernelSpec(kind=h["kernel"]["kind"], gamma=h["kernel"]["gamma"]))
    dual_doc = doc["dual"]
    dual = DualSolution(
        alpha={tid: np.array(a, dtype=float) for tid, a in dual_doc["alpha"].items()},
        beta=np.array(dual_doc["beta"], dtype=float),
        beta_pairs=tuple((p[0], int(p[1]), int(p[2])) for p in dual_doc["beta_pairs"]),
        objective=dual_doc["objective"],
        kkt_residual=dual_doc["kkt_residual"],
        iterations=dual_doc["iterations"],
        converged=dual_doc["converged"],
    )
    sup = doc["support"]
    n = len(sup["coef"])
    d = len(sup["V1"][0]) if n else 0
    support = SupportSet(
        coef=np.array(sup["coef"], dtype=float),
        u=np.array(sup["u"], dtype=int),
        task_index=np.array(sup["task_index"], dtype=int),
        V1=np.array(sup["V1"], dtype=float).reshape(n, d),
        V2=np.array(sup["V2"], dtype=float).reshape(n, d),
        expand=np.array(sup["expand"], dtype=bool),
    )
    weights = None
    if doc.get("linear_weights") is not None:
        lw = doc["linear_weights"]
        weights = LinearWeights(
            w0=np.array(lw["w0"], dtype=float),
            v={tid: np.array(vt, dtype=float) for tid, vt in lw["v"].items()},
        )
    return TrainedModel(hyper=hyper, task_ids=tuple(doc["task_ids"]), dual=dual,
                        support=support, raw_delta=bool(doc["raw_delta"]),
                        linear_weights=weights)


def save_model(model: TrainedModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path: str | Path) -> TrainedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: corrupted model file: {exc}") from None
    if not isinstance(doc, dict):
        raise DataError(f"{path}: corrupted model file")
    try:
        return model_from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"{path}: corrupted model file: {exc}") from None
