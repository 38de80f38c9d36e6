"""Base kernels, multi-task kernels, and Gram assembly over the augmented set.

The augmented variable set joins real instances with rank pseudo-examples.
A pseudo-example lives in feature space as phi(x_p) - phi(x_q), so kernel
values against it expand into sums/differences of base-kernel evaluations;
for the linear base kernel this is identical to dotting the explicit
difference vectors. The optional raw-delta mode instead applies the base
kernel directly to the raw difference vectors.

Two multi-task couplings are supported:

  gc:  (1/mu + delta_st) * k        -- every augmented point shares
  ts:  (u_a*u_b/mu + delta_st) * k  -- only real instances (u=1) share
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MultiTaskDataset
from .ranking import PseudoExample


@dataclass(frozen=True)
class KernelSpec:
    """Base kernel: 'linear' or 'rbf' with bandwidth gamma."""

    kind: str = "linear"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf":
            if self.gamma is None or self.gamma <= 0:
                raise ValueError("rbf kernel needs gamma > 0")

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"


@dataclass(frozen=True)
class AugmentedPoint:
    """One dual variable's data point: a real instance or a pseudo-example."""

    task_index: int
    kind: str                 # 'instance' or 'pseudo'
    i: int | None = None      # instance index, when kind == 'instance'
    p: int | None = None      # pair indices, when kind == 'pseudo'
    q: int | None = None

    @property
    def u(self) -> int:
        return 1 if self.kind == "instance" else 0


def base_kernel(x: np.ndarray, x2: np.ndarray, spec: KernelSpec) -> float:
    """Evaluate the base kernel on a single pair of raw vectors."""
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    if spec.is_linear:
        return float(x @ x2)
    diff = x - x2
    return float(np.exp(-spec.gamma * (diff @ diff)))


def base_gram(X: np.ndarray, Y: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Base-kernel Gram matrix between the rows of X and Y."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if spec.is_linear:
        return X @ Y.T
    sq = (X ** 2).sum(axis=1)[:, None] + (Y ** 2).sum(axis=1)[None, :] - 2.0 * X @ Y.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-spec.gamma * sq)


def _point_vectors(point: AugmentedPoint, dataset: MultiTaskDataset,
                   pseudos: list[PseudoExample]):
    """Resolve a point into its raw constituents (x,) or (x_p, x_q)."""
    X = dataset.tasks[point.task_index].X
    if point.kind == "instance":
        return (X[point.i],)
    return (X[point.p], X[point.q])


def cross_kernel(a: AugmentedPoint, b: AugmentedPoint, dataset: MultiTaskDataset,
                 pseudos: list[PseudoExample], spec: KernelSpec,
                 raw_delta: bool = False) -> float:
    """Base-kernel value between two augmented points.

    With feature-space pseudo-examples (default) a pseudo point expands
    as phi(x_p) - phi(x_q), giving the 2- and 4-term sums below. With
    ``raw_delta`` the base kernel is applied to the raw delta vectors.
    """
    if raw_delta:
        def raw(point):
            vecs = _point_vectors(point, dataset, pseudos)
            return vecs[0] if len(vecs) == 1 else vecs[0] - vecs[1]
        return base_kernel(raw(a), raw(b), spec)
    va = _point_vectors(a, dataset, pseudos)
    vb = _point_vectors(b, dataset, pseudos)
    total = 0.0
    for sa, xa in zip((1.0, -1.0), va):
        for sb, xb in zip((1.0, -1.0), vb):
            total += sa * sb * base_kernel(xa, xb, spec)
    return total


def mtl_kernel_gc(a: AugmentedPoint, b: AugmentedPoint, mu: float,
                  dataset: MultiTaskDataset, pseudos: list[PseudoExample],
                  spec: KernelSpec, raw_delta: bool = False) -> float:
    """Globally-consistent multi-task kernel: (1/mu + delta_st) * k."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    same = 1.0 if a.task_index == b.task_index else 0.0
    return (1.0 / mu + same) * cross_kernel(a, b, dataset, pseudos, spec, raw_delta)


def mtl_kernel_ts(a: AugmentedPoint, b: AugmentedPoint, mu: float,
                  dataset: MultiTaskDataset, pseudos: list[PseudoExample],
                  spec: KernelSpec, raw_delta: bool = False) -> float:
    """Task-specific (operator-valued) kernel: (u_a*u_b/mu + delta_st) * k.

    The shared 1/mu coupling vanishes whenever either point is a
    pseudo-example, so rank constraints never touch the shared weight.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    same = 1.0 if a.task_index == b.task_index else 0.0
    return (a.u * b.u / mu + same) * cross_kernel(a, b, dataset, pseudos, spec, raw_delta)


def augmented_points(dataset: MultiTaskDataset,
                     pseudos: list[PseudoExample]) -> list[AugmentedPoint]:
    """Canonical dual-variable ordering: all instances (task-major,
    instance-minor), then all pseudo-examples (task-major, pair-minor)."""
    points = [
        AugmentedPoint(task_index=t, kind="instance", i=i)
        for t, task in enumerate(dataset.tasks)
        for i in range(task.m)
    ]
    task_seq = [ps.task_index for ps in pseudos]
    if task_seq != sorted(task_seq):
        raise ValueError("pseudo-examples must be in task-major order")
    points.extend(
        AugmentedPoint(task_index=ps.task_index, kind="pseudo", p=ps.p, q=ps.q)
        for ps in pseudos
    )
    return points


def _signed_incidence(points: list[AugmentedPoint], dataset: MultiTaskDataset) -> tuple[np.ndarray, np.ndarray]:
    """Stack all raw instance rows and express each augmented point as a
    +/-1 combination of them: instance -> e_i, pseudo -> e_p - e_q."""
    offsets = np.cumsum([0] + [t.m for t in dataset.tasks])
    Xall = np.vstack([t.X for t in dataset.tasks])
    S = np.zeros((len(points), Xall.shape[0]))
    for r, pt in enumerate(points):
        base = offsets[pt.task_index]
        if pt.kind == "instance":
            S[r, base + pt.i] = 1.0
        else:
            S[r, base + pt.p] = 1.0
            S[r, base + pt.q] = -1.0
    return Xall, S


def cross_gram(points: list[AugmentedPoint], dataset: MultiTaskDataset,
               pseudos: list[PseudoExample], spec: KernelSpec,
               raw_delta: bool = False) -> np.ndarray:
    """Base-kernel Gram over the augmented points (vectorized)."""
    if raw_delta:
        rows = []
        for pt in points:
            vecs = _point_vectors(pt, dataset, pseudos)
            rows.append(vecs[0] if len(vecs) == 1 else vecs[0] - vecs[1])
        P = np.vstack(rows)
        return base_gram(P, P, spec)
    Xall, S = _signed_incidence(points, dataset)
    K = base_gram(Xall, Xall, spec)
    return S @ K @ S.T


def assemble_gram(points: list[AugmentedPoint], variant: str, mu: float,
                  dataset: MultiTaskDataset, pseudos: list[PseudoExample],
                  spec: KernelSpec, raw_delta: bool = False) -> np.ndarray:
    """Dense symmetric multi-task Gram matrix over the augmented points."""
    if not points:
        raise ValueError("empty point list")
    if mu <= 0:
        raise ValueError("mu must be positive")
    if variant not in ("gc", "ts", "mtl"):
        raise ValueError(f"unknown variant {variant!r}")
    K = cross_gram(points, dataset, pseudos, spec, raw_delta)
    tasks = np.array([pt.task_index for pt in points])
    same = (tasks[:, None] == tasks[None, :]).astype(float)
    if variant == "ts":
        u = np.array([pt.u for pt in points], dtype=float)
        shared = np.outer(u, u) / mu
    else:  # gc and plain mtl share the coupling; mtl simply has no pseudos
        shared = np.full((len(points), len(points)), 1.0 / mu)
    G = (shared + same) * K
    return 0.5 * (G + G.T)  # exact symmetry against round-off
