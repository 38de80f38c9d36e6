"""Command-line interface: synth, train, predict, eval, cv, grid.

Every command is deterministic given its flags and seed. Exit codes:
0 success, 1 internal failure, 2 usage or data error. Flags override
values from an optional flat key=value config file (--config).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .data import (
    DataError,
    MultiTaskDataset,
    SyntheticConfig,
    apply_standardization,
    generate_synthetic,
    load_dataset,
    save_dataset,
    standardize,
)
from .evaluate import (
    GridSpec,
    grid_search,
    loto_cv,
    predict_in_task_many,
    predict_out_of_task_many,
)
from .kernels import KernelSpec
from .trainer import Hyperparameters, load_model, save_model, train

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad flags or bad input data; maps to exit code 2."""


def _read_config_file(path: str) -> dict[str, str]:
    config = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path} line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        config[key.strip()] = value.strip()
    return config


def _coerce(raw: str):
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def _resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Fill unset flags from the config file; flags always win."""
    del parser
    if not getattr(args, "config", None):
        return args
    config = _read_config_file(args.config)
    for key, raw in config.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, _coerce(raw))
    return args


def _log_config(command: str, args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print(f"[{command}] resolved config: {resolved}")


def _load(path: str) -> MultiTaskDataset:
    try:
        return load_dataset(path)
    except (DataError, OSError) as exc:
        raise UsageError(str(exc)) from None


def _kernel_from_args(args) -> KernelSpec:
    if args.kernel == "rbf":
        if args.gamma is None:
            raise UsageError("--kernel rbf requires --gamma")
        return KernelSpec(kind="rbf", gamma=args.gamma)
    return KernelSpec(kind="linear")


def _hyper_from_args(args) -> Hyperparameters:
    try:
        return Hyperparameters(mu=args.mu, C=args.C, a=args.a,
                               kernel=_kernel_from_args(args), variant=args.variant)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _maybe_standardize(args, dataset: MultiTaskDataset) -> MultiTaskDataset:
    if getattr(args, "standardize", False):
        dataset, _ = standardize(dataset)
    return dataset


# ---------------------------------------------------------------------------
# Commands

def cmd_synth(args) -> int:
    try:
        config = SyntheticConfig(T=args.tasks, m=args.m, d=args.d,
                                 task_spread=args.task_spread, noise_band=args.noise_band,
                                 flip_prob=args.flip_prob, score_noise=args.score_noise,
                                 seed=args.seed)
    except DataError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_set, truth = generate_synthetic(config)
    # validation and test reuse the shared weight but draw fresh tasks
    val_cfg = SyntheticConfig(**{**config.__dict__, "seed": config.seed + 1})
    test_cfg = SyntheticConfig(**{**config.__dict__, "seed": config.seed + 2})
    val_set, _ = generate_synthetic(val_cfg, shared_w0=truth.w0)
    test_set, _ = generate_synthetic(test_cfg, shared_w0=truth.w0)
    save_dataset(train_set, out / "train.csv")
    save_dataset(val_set, out / "validation.csv")
    save_dataset(test_set, out / "test.csv")
    sidecar = {
        "w0": truth.w0.tolist(),
        "v": {tid: v.tolist() for tid, v in truth.v.items()},
        "true_labels": {tid: y.tolist() for tid, y in truth.true_labels.items()},
        "config": {k: getattr(config, k) for k in
                   ("T", "m", "d", "task_spread", "noise_band", "flip_prob", "score_noise", "seed")},
    }
    (out / "truth.json").write_text(json.dumps(sidecar, indent=1) + "\n", encoding="utf-8")
    print(f"wrote train/validation/test CSVs and truth.json under {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    hyper = _hyper_from_args(args)
    dataset = _maybe_standardize(args, _load(args.data))
    try:
        model = train(dataset, hyper, pair_strategy=args.pairs, seed=args.seed,
                      tie_epsilon=args.tie_epsilon, tol=args.tol, raw_delta=args.raw_delta_kernel)
    except DataError as exc:
        raise UsageError(str(exc)) from None
    save_model(model, args.model)
    n_alpha = sum(int(np.count_nonzero(a > 0)) for a in model.dual.alpha.values())
    n_beta = int(np.count_nonzero(model.dual.beta > 0))
    print(f"dual objective: {model.dual.objective:.10g}")
    print(f"kkt residual:   {model.dual.kkt_residual:.3g} (converged={model.dual.converged})")
    print(f"support: {n_alpha} instance multipliers, {n_beta} rank multipliers")
    print(f"model written to {args.model}")
    return EXIT_OK


def _predict_scores(args) -> np.ndarray:
    model = load_model(args.model)
    try:
        dataset = load_dataset(args.data)
    except DataError as exc:
        raise UsageError(str(exc)) from None
    rows = np.vstack([t.X for t in dataset.tasks])
    if args.mode == "shared":
        return predict_out_of_task_many(model, rows)
    if args.mode.startswith("task:"):
        task_id = args.mode.split(":", 1)[1]
        try:
            return predict_in_task_many(model, task_id, rows)
        except KeyError as exc:
            raise UsageError(str(exc)) from None
    raise UsageError(f"bad --mode {args.mode!r}; expected shared or task:<id>")


def cmd_predict(args) -> int:
    try:
        scores = _predict_scores(args)
    except DataError as exc:
        raise UsageError(str(exc)) from None
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for s in scores:
            fh.write(f"{float(s)!r}\n")
    print(f"wrote {len(scores)} scores to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evaluate import auc, recall_fpr
    model = load_model(args.model)
    dataset = _load(args.data)
    records = []
    for task in dataset.tasks:
        if args.mode == "shared":
            scores = predict_out_of_task_many(model, task.X)
        else:
            scores = predict_in_task_many(model, task.task_id, task.X)
        task_auc = auc(scores, task.y)
        recall, fpr = recall_fpr(scores, task.y, scores[task.y == -1], args.threshold)
        records.append({"task_id": task.task_id, "auc": task_auc, "recall": recall,
                        "fpr": fpr, "detected": recall > 0, "threshold": args.threshold,
                        "variant": model.hyper.variant, "mu": model.hyper.mu,
                        "C": model.hyper.C, "a": model.hyper.a,
                        "gamma": model.hyper.kernel.gamma})
    _emit_records(records, args.out)
    return EXIT_OK


def cmd_cv(args) -> int:
    hyper = _hyper_from_args(args)
    dataset = _maybe_standardize(args, _load(args.data))
    try:
        report = loto_cv(dataset, hyper, pair_strategy=args.pairs, seed=args.seed,
                         threshold=args.threshold, tie_epsilon=args.tie_epsilon,
                         tol=args.tol, jobs=args.jobs)
    except DataError as exc:
        raise UsageError(str(exc)) from None
    records = []
    for tid, r in report.per_task.items():
        records.append({"task_id": tid, "auc": r.auc, "recall": r.recall_at_threshold,
                        "fpr": r.fpr_at_threshold, "detected": r.detected,
                        "threshold": r.threshold, "variant": hyper.variant,
                        "mu": hyper.mu, "C": hyper.C, "a": hyper.a,
                        "gamma": hyper.kernel.gamma})
    _emit_records(records, args.out)
    print(f"mean auc {report.mean_auc:.4f}  mean recall {report.mean_recall:.4f}  "
          f"mean fpr {report.mean_fpr:.4f}  detection rate {report.detection_rate:.4f}")
    return EXIT_OK


def _parse_grid_list(raw: str | None, default: tuple[float, ...]) -> tuple[float, ...]:
    if raw is None:
        return default
    try:
        values = tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError as exc:
        raise UsageError(f"bad grid list {raw!r}: {exc}") from None
    if not values:
        raise UsageError(f"empty grid list {raw!r}")
    return values


def cmd_grid(args) -> int:
    defaults = GridSpec()
    grid = GridSpec(
        mu_values=_parse_grid_list(args.mu_grid, defaults.mu_values),
        C_values=_parse_grid_list(args.c_grid, defaults.C_values),
        gamma_values=_parse_grid_list(args.gamma_grid, defaults.gamma_values),
        a_values=_parse_grid_list(args.a_grid, defaults.a_values),
    )
    train_set = _maybe_standardize(args, _load(args.data))
    val_set = _load(args.validation)
    try:
        best, table = grid_search(train_set, val_set, grid, variant=args.variant,
                                  pair_strategy=args.pairs, kernel_kind=args.kernel,
                                  seed=args.seed, tol=args.tol, jobs=args.jobs)
    except DataError as exc:
        raise UsageError(str(exc)) from None
    _emit_records(table, args.out)
    print(f"best: variant={best.variant} mu={best.mu} C={best.C} a={best.a} "
          f"gamma={best.kernel.gamma}")
    return EXIT_OK


def _emit_records(records: list[dict], out: str | None) -> None:
    if records:
        keys = list(records[0].keys())
        widths = {k: max(len(k), *(len(_fmt(r[k])) for r in records)) for k in keys}
        print("  ".join(k.ljust(widths[k]) for k in keys))
        for r in records:
            print("  ".join(_fmt(r[k]).ljust(widths[k]) for k in keys))
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            for r in records:
                fh.write(json.dumps(r) + "\n")
        print(f"report written to {out}")


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


# ---------------------------------------------------------------------------
# Parser

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--seed", type=int, default=None)


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=["mtl", "gc", "ts"], default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--kernel", choices=["linear", "rbf"], default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--pairs", default=None, help="all | adjacent | sampled:K")
    p.add_argument("--tie-epsilon", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--raw-delta-kernel", action="store_true",
                   help="apply the base kernel to raw difference vectors")


_HYPER_DEFAULTS = {
    "seed": 0, "variant": "mtl", "mu": 1.0, "C": 1.0, "a": 0.0,
    "kernel": "linear", "pairs": "adjacent", "tie_epsilon": 0.0, "tol": 1e-8,
    "threshold": 0.0, "jobs": 1,
    "tasks": 5, "m": 40, "d": 8, "task_spread": 0.3, "noise_band": 0.5,
    "flip_prob": 0.0, "score_noise": 0.0, "mode": "shared",
}


def _apply_defaults(args: argparse.Namespace) -> argparse.Namespace:
    for key, value in _HYPER_DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)
    return args


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtlrank",
                                     description="Multi-task SVM with rank supervision")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic train/validation/test data")
    _add_common(p)
    p.add_argument("--tasks", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--task-spread", type=float, default=None)
    p.add_argument("--noise-band", type=float, default=None)
    p.add_argument("--flip-prob", type=float, default=None)
    p.add_argument("--score-noise", type=float, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model")
    _add_common(p)
    _add_hyper_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="output model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score instances with a trained model")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", default=None, help="shared | task:<id>")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="metrics of a trained model on a dataset")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", default=None, help="shared | task:<id>")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="leave-one-task-out cross-validation")
    _add_common(p)
    _add_hyper_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("grid", help="hyperparameter grid search")
    _add_common(p)
    p.add_argument("--data", required=True, help="training data")
    p.add_argument("--validation", required=True, help="validation data (distinct tasks)")
    p.add_argument("--variant", choices=["mtl", "gc", "ts"], default=None)
    p.add_argument("--kernel", choices=["linear", "rbf"], default=None)
    p.add_argument("--pairs", default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--mu-grid", default=None, help="comma-separated; default is the full range")
    p.add_argument("--c-grid", default=None)
    p.add_argument("--gamma-grid", default=None)
    p.add_argument("--a-grid", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _resolve(args, parser)
        args = _apply_defaults(args)
        _log_config(args.command, args)
        return args.func(args)
    except (UsageError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse errors already use code 2
        return int(exc.code or 0)
    except Exception as exc:  # pragma: no cover - internal failure path
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
