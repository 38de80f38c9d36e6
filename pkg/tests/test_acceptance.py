"""Acceptance suite: each criterion prints a single pass/fail line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
print. Criterion 7 is a directional benchmark on synthetic data; the
others are exact mathematical properties of the implementation.
"""

import time

import numpy as np
import pytest

from mtlrank.data import MultiTaskDataset, SyntheticConfig, TaskDataset, generate_synthetic
from mtlrank.evaluate import GridSpec, loto_cv, predict_out_of_task_many
from mtlrank.kernels import KernelSpec, assemble_gram, augmented_points, cross_gram
from mtlrank.qp import BoxQP, solve_coordinate, solve_projected_gradient_oracle
from mtlrank.ranking import build_rank_pairs, materialize_pseudo_examples
from mtlrank.trainer import (
    DualSolution,
    Hyperparameters,
    TrainedModel,
    primal_objective,
    recover_linear_weights,
    train,
)

LIN = KernelSpec("linear")


def report(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {num}] {status}: {detail}", flush=True)
    assert ok, f"criterion {num}: {detail}"


def random_instance(rng):
    T = int(rng.integers(2, 4))
    d = int(rng.integers(3, 6))
    tasks = []
    for t in range(T):
        m = int(rng.integers(5, 11))
        tasks.append(TaskDataset(
            f"t{t}", X=rng.standard_normal((m, d)),
            y=rng.choice([-1, 1], m), scores=rng.standard_normal(m)))
    return MultiTaskDataset(tuple(tasks))


@pytest.fixture(scope="module")
def trained_battery():
    """50 random linear problems trained to high precision; shared by the
    duality-gap and complementarity criteria."""
    rng = np.random.default_rng(20240501)
    variants = ["mtl", "gc", "ts"]
    battery = []
    for i in range(50):
        ds = random_instance(rng)
        variant = variants[i % 3]
        mu = float(rng.choice([0.1, 1.0, 10.0]))
        a = 0.0 if variant == "mtl" else float(rng.choice([0.0, 1.0]))
        hyper = Hyperparameters(mu=mu, C=1.0, a=a, variant=variant)
        model = train(ds, hyper, pair_strategy="adjacent", tol=1e-10,
                      max_sweeps=200000)
        battery.append((ds, hyper, model))
    return battery


def test_criterion_1_duality_gap(trained_battery):
    start = time.monotonic()
    worst = 0.0
    for ds, hyper, model in trained_battery:
        pairs = build_rank_pairs(ds, "adjacent") if hyper.variant != "mtl" else None
        pseudos = materialize_pseudo_examples(ds, pairs) if pairs is not None else []
        pe = primal_objective(model.linear_weights, ds, pseudos, hyper)
        gap = abs(pe.objective - model.dual.objective) / (1.0 + abs(model.dual.objective))
        worst = max(worst, gap)
    elapsed = time.monotonic() - start
    ok = worst <= 1e-6 and elapsed < 60.0
    report(1, ok, f"max relative duality gap {worst:.3g} over 50 instances "
                  f"(limit 1e-6), {elapsed:.1f}s (limit 60s)")


def test_criterion_2_solver_oracle_equivalence():
    start = time.monotonic()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 13))
        A = rng.standard_normal((n, n))
        qp = BoxQP(Q=A.T @ A + 1e-6 * np.eye(n), upper=rng.uniform(0.2, 5.0, n))
        o1 = solve_coordinate(qp, tol=1e-10).objective
        o2 = solve_projected_gradient_oracle(qp, tol=1e-10).objective
        worst = max(worst, abs(o1 - o2))
    elapsed = time.monotonic() - start
    ok = worst <= 1e-8 and elapsed < 30.0
    report(2, ok, f"max objective disagreement {worst:.3g} over 100 box QPs "
                  f"(limit 1e-8), {elapsed:.1f}s (limit 30s)")


def _complementarity_violation(ds, hyper, model):
    tol_act = 1e-6  # multiplier considered at a bound below/above this
    w = model.linear_weights
    worst = 0.0

    def check(multiplier, upper, margin):
        nonlocal worst
        if multiplier <= tol_act:
            worst = max(worst, max(0.0, 1.0 - margin))
        elif multiplier >= upper - tol_act:
            worst = max(worst, max(0.0, margin - 1.0))
        else:
            worst = max(worst, abs(margin - 1.0))

    for t in ds.tasks:
        f = t.X @ w.w_task(t.task_id)
        for i in range(t.m):
            check(model.dual.alpha[t.task_id][i], hyper.C, float(t.y[i] * f[i]))
    if len(model.dual.beta) and hyper.C_rank > 0:
        pairs = build_rank_pairs(ds, "adjacent")
        pseudos = materialize_pseudo_examples(ds, pairs)
        for b, pseudo in zip(model.dual.beta, pseudos):
            tid = ds.task_ids[pseudo.task_index]
            vec = w.w_task(tid) if hyper.variant == "gc" else w.v[tid]
            check(float(b), hyper.C_rank, float(pseudo.delta @ vec))
    return worst


def test_criterion_3_kkt_complementarity(trained_battery):
    worst = 0.0
    for ds, hyper, model in trained_battery:
        worst = max(worst, _complementarity_violation(ds, hyper, model))
    ok = worst <= 1e-5
    report(3, ok, f"max complementary-slackness violation {worst:.3g} over the "
                  f"50 trained models (limit 1e-5)")


def test_criterion_4_kernel_psd():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        ds = random_instance(rng)
        pairs = build_rank_pairs(ds, "adjacent")
        pseudos = materialize_pseudo_examples(ds, pairs)
        points = augmented_points(ds, pseudos)
        for variant in ("gc", "ts"):
            for spec in (LIN, KernelSpec("rbf", gamma=float(rng.uniform(0.1, 2.0)))):
                G = assemble_gram(points, variant, float(rng.uniform(0.1, 10.0)),
                                  ds, pseudos, spec)
                floor = -np.linalg.eigvalsh(G).min() / max(np.abs(G).max(), 1e-30)
                worst = max(worst, floor)
    ok = worst <= 1e-8
    report(4, ok, f"worst normalized negative eigenvalue {worst:.3g} over 20 "
                  f"augmented datasets x 2 variants x 2 kernels (limit 1e-8)")


def test_criterion_5_reduction_identities():
    rng = np.random.default_rng(13)
    worst = 0.0
    # (a) a=0 and all-tied scores collapse every variant to the plain objective
    for seed in range(3):
        ds = random_instance(np.random.default_rng(seed))
        tied = MultiTaskDataset(tuple(
            TaskDataset(t.task_id, X=t.X, y=t.y, scores=np.zeros(t.m)) for t in ds.tasks))
        base = train(ds, Hyperparameters(mu=1.0, C=1.0, variant="mtl"), tol=1e-12)
        base_tied = train(tied, Hyperparameters(mu=1.0, C=1.0, variant="mtl"), tol=1e-12)
        for variant in ("gc", "ts"):
            zero_a = train(ds, Hyperparameters(mu=1.0, C=1.0, a=0.0, variant=variant),
                           tol=1e-12)
            worst = max(worst, abs(zero_a.dual.objective - base.dual.objective))
            tied_run = train(tied, Hyperparameters(mu=1.0, C=1.0, a=1.0, variant=variant),
                             tol=1e-12)
            worst = max(worst, abs(tied_run.dual.objective - base_tied.dual.objective))
    # (b) T=1 gc equals a directly assembled single-task rank-SVM dual
    for seed in range(3):
        m, d = 8, 4
        task = TaskDataset("t", X=rng.standard_normal((m, d)),
                           y=rng.choice([-1, 1], m), scores=rng.standard_normal(m))
        ds = MultiTaskDataset((task,))
        mu, C, a = float(rng.uniform(0.2, 2.0)), 1.0, 1.0
        model = train(ds, Hyperparameters(mu=mu, C=C, a=a, variant="gc"), tol=1e-12)
        pairs = build_rank_pairs(ds, "adjacent")
        pseudos = materialize_pseudo_examples(ds, pairs)
        points = augmented_points(ds, pseudos)
        K = (1.0 / mu + 1.0) * cross_gram(points, ds, pseudos, LIN)
        s = np.concatenate([task.y.astype(float), np.ones(len(pseudos))])
        upper = np.concatenate([np.full(m, C), np.full(len(pseudos), a * C)])
        direct = solve_coordinate(BoxQP(Q=np.outer(s, s) * K, upper=upper), tol=1e-12)
        worst = max(worst, abs(model.dual.objective - direct.objective))
    ok = worst <= 1e-8
    report(5, ok, f"max dual-objective mismatch {worst:.3g} across reduction "
                  f"identities (limit 1e-8)")


def test_criterion_6_ts_isolation():
    rng = np.random.default_rng(17)
    exact = True
    for seed in range(5):
        ds = random_instance(np.random.default_rng(100 + seed))
        model = train(ds, Hyperparameters(mu=0.5, C=1.0, a=1.0, variant="ts"), tol=1e-8)
        X = rng.standard_normal((7, ds.d))
        before = predict_out_of_task_many(model, X)
        sup = model.support
        zeroed_support = type(sup)(
            coef=np.where(sup.u == 1, sup.coef, 0.0), u=sup.u,
            task_index=sup.task_index, V1=sup.V1, V2=sup.V2, expand=sup.expand)
        zeroed = TrainedModel(
            hyper=model.hyper, task_ids=model.task_ids,
            dual=DualSolution(alpha=model.dual.alpha,
                              beta=np.zeros_like(model.dual.beta),
                              beta_pairs=model.dual.beta_pairs, objective=0.0,
                              kkt_residual=0.0, iterations=0, converged=True),
            support=zeroed_support, linear_weights=model.linear_weights)
        after = predict_out_of_task_many(zeroed, X)
        exact = exact and np.array_equal(before, after)
    report(6, exact, "out-of-task scores bitwise invariant to zeroing all rank "
                     "multipliers for 5 random ts models")


def test_criterion_7_directional_benchmark():
    start = time.monotonic()
    wins = 0
    det_ok = 0
    ts_means, mtl_means = [], []
    hyper_ts = Hyperparameters(mu=0.2, C=0.1, a=0.05, variant="ts")
    hyper_mtl = Hyperparameters(mu=0.2, C=0.1, a=0.0, variant="mtl")
    for seed in range(20):
        cfg = SyntheticConfig(T=8, m=60, d=10, flip_prob=0.3, noise_band=0.5,
                              score_noise=0.1, seed=seed)
        ds, _ = generate_synthetic(cfg)
        r_ts = loto_cv(ds, hyper_ts, pair_strategy="adjacent", tol=1e-4, jobs=4)
        r_mtl = loto_cv(ds, hyper_mtl, tol=1e-4, jobs=4)
        wins += r_ts.mean_auc > r_mtl.mean_auc
        det_ok += r_ts.detection_rate >= r_mtl.detection_rate
        ts_means.append(r_ts.mean_auc)
        mtl_means.append(r_mtl.mean_auc)
    elapsed = time.monotonic() - start
    ok = wins >= 16 and det_ok == 20 and elapsed < 600.0
    report(7, ok, f"rank-coupled variant wins {wins}/20 seeds (need >= 16), "
                  f"detection-rate condition holds in {det_ok}/20, "
                  f"mean AUC {np.mean(ts_means):.4f} vs {np.mean(mtl_means):.4f}, "
                  f"{elapsed:.0f}s (limit 600s)")


def test_criterion_8_mu_infinity_decoupling():
    rng = np.random.default_rng(19)
    w_true = rng.standard_normal(4)
    tasks = []
    for t in range(3):
        X = rng.standard_normal((25, 4))
        X = X[np.abs(X @ w_true) > 0.5]
        tasks.append(TaskDataset(f"t{t}", X=X, y=np.where(X @ w_true > 0, 1, -1)))
    ds = MultiTaskDataset(tuple(tasks))
    joint = train(ds, Hyperparameters(mu=1e8, C=1.0, variant="mtl"), tol=1e-10)
    agree = 0
    total = 0
    for t in ds.tasks:
        # independent per-task SVM without offset, assembled directly
        Q = np.outer(t.y, t.y) * (t.X @ t.X.T)
        sol = solve_coordinate(BoxQP(Q=Q, upper=np.full(t.m, 1.0)), tol=1e-10)
        w_single = (sol.lam * t.y) @ t.X
        joint_pred = np.sign(t.X @ joint.linear_weights.w_task(t.task_id))
        single_pred = np.sign(t.X @ w_single)
        agree += int(np.sum(joint_pred == single_pred))
        total += t.m
    ok = agree == total
    report(8, ok, f"per-task sign agreement {agree}/{total} between mu=1e8 joint "
                  f"training and independent per-task SVMs (need 100%)")


def test_criterion_9_grid_defaults():
    grid = GridSpec()
    pow2 = tuple(2.0 ** k for k in range(-10, 11))
    mu_expected = [1e-7]
    for k in range(-6, 4):
        mu_expected += [float(f"5e{k}"), float(f"1e{k}")]
    a_expected = [1e-6]
    for k in range(-5, 4):
        a_expected += [float(f"5e{k}"), float(f"1e{k}")]
    ok = (grid.C_values == pow2 and grid.gamma_values == pow2
          and grid.mu_values == tuple(mu_expected)
          and grid.a_values == tuple(a_expected)
          and len(grid.C_values) == 21 and len(grid.mu_values) == 21
          and len(grid.a_values) == 19)
    report(9, ok, f"default grids: {len(grid.mu_values)} mu, {len(grid.C_values)} C, "
                  f"{len(grid.gamma_values)} gamma, {len(grid.a_values)} a values "
                  f"with the documented ranges")
