"""Pairwise rank constraints from auxiliary scores.

For each task, instances with strictly higher scores should rank above
instances with lower scores. Each ordered pair (p, q) becomes a
pseudo-example with feature vector x_p - x_q and label +1; no pair ever
crosses two tasks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import DataError, MultiTaskDataset

logger = logging.getLogger(__name__)

STRATEGIES = ("all", "adjacent", "sampled")
DEFAULT_DROP_EPSILON = 1e-12


@dataclass(frozen=True)
class RankPair:
    """Ordered pair within one task: p is scored strictly above q."""

    task_index: int
    p: int
    q: int


@dataclass(frozen=True)
class RankPairSet:
    pairs: tuple[RankPair, ...]
    strategy: str
    tie_epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        seen = set()
        for pair in self.pairs:
            key = (pair.task_index, pair.p, pair.q)
            if key in seen:
                raise DataError(f"duplicate rank pair {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.pairs)

    def for_task(self, task_index: int) -> list[RankPair]:
        return [p for p in self.pairs if p.task_index == task_index]


@dataclass(frozen=True)
class PseudoExample:
    """Difference vector x_p - x_q, always labeled +1."""

    task_index: int
    p: int
    q: int
    delta: np.ndarray
    z: int = 1


def parse_strategy(spec: str) -> tuple[str, int | None]:
    """Parse 'all', 'adjacent', or 'sampled:K' into (name, K)."""
    if spec in ("all", "adjacent"):
        return spec, None
    if spec.startswith("sampled:"):
        try:
            k = int(spec.split(":", 1)[1])
        except ValueError:
            raise DataError(f"bad pair strategy {spec!r}") from None
        if k < 1:
            raise DataError("sampled:K needs K >= 1")
        return "sampled", k
    raise DataError(f"unknown pair strategy {spec!r}; expected all, adjacent, or sampled:K")


def _all_pairs_for_task(scores: np.ndarray, tie_epsilon: float) -> list[tuple[int, int]]:
    m = len(scores)
    out = []
    for p in range(m):
        for q in range(m):
            if p != q and scores[p] > scores[q] + tie_epsilon:
                out.append((p, q))
    return out


def build_rank_pairs(dataset: MultiTaskDataset, strategy: str = "adjacent",
                     tie_epsilon: float = 0.0, seed: int = 0) -> RankPairSet:
    """Derive per-task ordered pairs from the auxiliary scores.

    ``all`` emits every strictly ordered pair; ``adjacent`` sorts each
    task by descending score and keeps consecutive pairs only;
    ``sampled:K`` draws K distinct pairs per task from the ``all`` set,
    deterministically per seed. Ties (score gap <= tie_epsilon) never
    produce a pair.
    """
    name, k = parse_strategy(strategy)
    if tie_epsilon < 0:
        raise DataError("tie_epsilon must be non-negative")
    rng = np.random.default_rng(seed)
    pairs: list[RankPair] = []
    for t, task in enumerate(dataset.tasks):
        if task.scores is None:
            raise DataError(f"task {task.task_id!r} has no scores; rank pairs require them")
        scores = task.scores
        if name == "all":
            chosen = _all_pairs_for_task(scores, tie_epsilon)
        elif name == "adjacent":
            order = np.argsort(-scores, kind="stable")
            chosen = []
            for a, b in zip(order[:-1], order[1:]):
                if scores[a] > scores[b] + tie_epsilon:
                    chosen.append((int(a), int(b)))
        else:
            universe = _all_pairs_for_task(scores, tie_epsilon)
            kk = k
            if kk > len(universe):
                logger.warning("task %s: sampled:%d clamped to %d available pairs",
                               task.task_id, kk, len(universe))
                kk = len(universe)
            idx = rng.choice(len(universe), size=kk, replace=False) if kk else []
            chosen = [universe[i] for i in sorted(idx)]
        pairs.extend(RankPair(task_index=t, p=p, q=q) for p, q in chosen)
    return RankPairSet(pairs=tuple(pairs), strategy=strategy, tie_epsilon=tie_epsilon)


def materialize_pseudo_examples(dataset: MultiTaskDataset, pairs: RankPairSet,
                                drop_epsilon: float = DEFAULT_DROP_EPSILON) -> list[PseudoExample]:
    """Turn rank pairs into difference-vector pseudo-examples.

    Pairs whose difference vector has no entry exceeding ``drop_epsilon``
    in magnitude are dropped (they cannot satisfy a unit rank margin and
    would put a zero on the dual Hessian diagonal).
    """
    out: list[PseudoExample] = []
    dropped = 0
    for pair in pairs.pairs:
        X = dataset.tasks[pair.task_index].X
        delta = X[pair.p] - X[pair.q]
        if np.max(np.abs(delta)) <= drop_epsilon:
            dropped += 1
            continue
        out.append(PseudoExample(task_index=pair.task_index, p=pair.p, q=pair.q, delta=delta))
    if dropped:
        logger.warning("dropped %d degenerate zero-difference pairs", dropped)
    return out
