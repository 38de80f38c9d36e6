"""Box-constrained convex QP solvers with KKT diagnostics.

All duals in this package share one shape:

    max  1'lam - 1/2 lam' Q lam    s.t.  0 <= lam_u <= c_u

The workhorse is exact cyclic coordinate ascent; a projected-gradient
solver with a certified step size serves as an independent oracle for
tests and diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-6
ZERO_DIAG = 1e-14
SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class BoxQP:
    """Problem data: symmetric PSD Q and per-variable upper bounds.

    The linear term is fixed at the all-ones vector of the SVM dual.
    """

    Q: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "upper", upper)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got {Q.shape}")
        scale = max(1.0, float(np.abs(Q).max())) if Q.size else 1.0
        if not np.allclose(Q, Q.T, atol=SYMMETRY_RTOL * scale, rtol=0):
            raise ValueError("Q is not symmetric")
        if upper.shape != (Q.shape[0],):
            raise ValueError(f"{len(upper)} bounds for {Q.shape[0]} variables")
        if np.any(upper <= 0):
            raise ValueError("all upper bounds must be strictly positive")

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    def objective(self, lam: np.ndarray) -> float:
        """Dual objective 1'lam - 1/2 lam' Q lam (maximization)."""
        return float(lam.sum() - 0.5 * lam @ (self.Q @ lam))


@dataclass(frozen=True)
class QPSolution:
    lam: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool


def _projected_gradient(g: np.ndarray, lam: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Componentwise feasible-ascent violation: g at interior points,
    max(g, 0) at the lower bound, min(g, 0) at the upper bound."""
    pi = g.copy()
    at_lower = lam <= 0
    at_upper = lam >= upper
    pi[at_lower] = np.maximum(g[at_lower], 0.0)
    pi[at_upper] = np.minimum(g[at_upper], 0.0)
    return pi


def kkt_residual(qp: BoxQP, lam: np.ndarray) -> float:
    """Max projected-gradient magnitude; 0 exactly at an optimum."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < -1e-12) or np.any(lam > qp.upper + 1e-12):
        raise ValueError("lambda outside the box")
    g = 1.0 - qp.Q @ lam
    return float(np.abs(_projected_gradient(g, lam, qp.upper)).max()) if qp.n else 0.0


def solve_coordinate(qp: BoxQP, tol: float = DEFAULT_TOL, max_sweeps: int | None = None,
                     seed: int = 0) -> QPSolution:
    """Cyclic coordinate ascent with exact single-variable updates.

    Each update solves its 1-d subproblem in closed form, so the
    objective is non-decreasing sweep over sweep. Variables with a
    (numerically) zero diagonal get the subgradient corner rule.
    Deterministic; the seed argument is accepted for interface parity
    with sampled components but the sweep order is fixed cyclic.
    """
    del seed
    n = qp.n
    if max_sweeps is None:
        max_sweeps = max(1000, 10 * n)
    Q = np.ascontiguousarray(qp.Q)
    upper = qp.upper
    diag = np.diag(Q).copy()
    lam = np.zeros(n)
    g = np.ones(n)  # gradient of the dual objective: 1 - Q lam
    sweeps = 0
    residual = np.inf
    for sweeps in range(1, max_sweeps + 1):
        pi = _projected_gradient(g, lam, upper)
        active = np.flatnonzero(np.abs(pi) > tol)
        if active.size == 0:
            residual = float(np.abs(pi).max()) if n else 0.0
            break
        for u in active:
            if diag[u] > ZERO_DIAG:
                new = min(max(lam[u] + g[u] / diag[u], 0.0), upper[u])
            else:
                new = upper[u] if g[u] > 0 else 0.0
            step = new - lam[u]
            if step != 0.0:
                lam[u] = new
                g -= step * Q[u]
        residual = float(np.abs(_projected_gradient(g, lam, upper)).max())
        if residual <= tol:
            break
    converged = residual <= tol
    return QPSolution(lam=lam, objective=qp.objective(lam), kkt_residual=residual,
                      iterations=sweeps, converged=converged)


def solve_projected_gradient_oracle(qp: BoxQP, tol: float = DEFAULT_TOL,
                                    max_iters: int | None = None) -> QPSolution:
    """Projected gradient ascent with step 1/L, L a certified row-sum
    (Gershgorin) bound on the top eigenvalue of Q. Slow but simple;
    used as an independent check on the coordinate solver."""
    n = qp.n
    if max_iters is None:
        max_iters = max(20000, 200 * n)
    L = float(np.abs(qp.Q).sum(axis=1).max()) if n else 1.0
    L = max(L, 1e-12)
    lam = np.zeros(n)
    iters = 0
    residual = np.inf
    for iters in range(1, max_iters + 1):
        g = 1.0 - qp.Q @ lam
        residual = float(np.abs(_projected_gradient(g, lam, qp.upper)).max()) if n else 0.0
        if residual <= tol:
            break
        lam = np.clip(lam + g / L, 0.0, qp.upper)
    converged = residual <= tol
    return QPSolution(lam=lam, objective=qp.objective(lam), kkt_residual=residual,
                      iterations=iters, converged=converged)
