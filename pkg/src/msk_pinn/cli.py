"""Reproducible experiment front-end.

Subcommands: generate, train, eval, sweep-datasize, ablate. Every artifact is
a pure function of (config file, seed); reruns produce byte-identical CSVs.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import experiments as E
from . import network as N
from .config import ConfigError, ExperimentConfig, load_config, write_config
from .data import make_windows, read_split_manifest, write_split_manifest, WindowSet
from .metrics import format_report_table, write_report_csv
from .simulator import load_dataset, validate_trial, write_manifest, write_trial_csv
from .svg import line_chart

HISTORY_HEADER = ["iteration", "L_F", "L_theta", "L_P", "L_total"]


def _out_dir(args) -> Path:
    root = args.out or os.environ.get("MSK_PINN_OUT") or "."
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args) -> ExperimentConfig:
    if args.config:
        return load_config(args.config, seed=args.seed)
    from .config import build_config

    return build_config({}, seed=args.seed)


def _fmt(v: float) -> str:
    return repr(float(v))


def cmd_generate(args) -> int:
    config = _load(args)
    out = _out_dir(args)
    trials = E.generate_trials(config, args.seed)
    sim = E.make_sim_config(config)
    entries = []
    print("trial  speed  seed        max|residual|")
    for i, trial in enumerate(trials):
        residual = validate_trial(trial, sim.dynamics)
        name = f"trial_{i:03d}.csv"
        write_trial_csv(trial, out / name)
        entries.append({"file": name, "speed": trial.speed, "seed": trial.seed})
        print(f"{i:5d}  {trial.speed:5.2f}  {trial.seed:10d}  {residual:.6e}")
    write_manifest(out / "manifest.json", sim, args.seed, entries)
    write_config(config, out / "config.ini")
    print(f"wrote {len(trials)} trials to {out}")
    return 0


def _history_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_HEADER)
        for i, h in enumerate(history):
            writer.writerow([i, _fmt(h.force), _fmt(h.angle), _fmt(h.physics),
                             _fmt(h.total)])


def cmd_train(args) -> int:
    config = _load(args)
    if config.model.kind not in ("network", "deeper"):
        print(f"train applies to network models, not '{config.model.kind}'",
              file=sys.stderr)
        return 2
    out = _out_dir(args)
    trials, _ = load_dataset(Path(args.data) / "manifest.json")
    train_set, _, manifest = E.prepare_splits(config, trials, args.seed)
    manifest["window"] = config.data.window
    manifest["stride"] = config.data.stride
    try:
        model, history, weights = E.train_network(config, train_set, args.seed,
                                                  physics=config.loss.physics > 0)
    except N.TrainingError as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return 1
    N.save_checkpoint(model, train_set.stats, train_set.dt, out / "checkpoint")
    _history_csv(out / "history.csv", history)
    write_split_manifest(out / "split.json", manifest)
    write_config(config, out / "config.ini")
    iters = list(range(len(history)))
    line_chart(out / "loss_curve.svg",
               [("L_total", iters, [h.total for h in history])],
               "Training loss", "iteration", "loss")
    print(f"trained {len(history)} iterations; "
          f"final L_total {history[-1].total:.6f}" if history else "no iterations run")
    return 0


def _select_test_windows(trials, manifest) -> list:
    windows = make_windows(trials, manifest["window"], manifest["stride"])
    if manifest["kind"] == "by-trial":
        test_ids = set(manifest["test_trials"])
        return [w for w in windows if w.trial_index in test_ids]
    return [windows[i] for i in manifest["test_windows"]]


def cmd_eval(args) -> int:
    out = _out_dir(args)
    model, stats, dt = N.load_checkpoint(args.checkpoint)
    trials, _ = load_dataset(Path(args.data) / "manifest.json")
    manifest = read_split_manifest(args.split)
    test_windows = _select_test_windows(trials, manifest)
    if not test_windows:
        print("split manifest selects no test windows", file=sys.stderr)
        return 2
    test_set = WindowSet(tuple(test_windows), stats, trials[0].dt)
    report = E.evaluate_network(model, test_set, args.seed, manifest["kind"])
    write_report_csv(report, out / "report.csv")
    print(format_report_table(report))
    actual, predicted = N.predict_windows(model, test_set, indices=[0])
    steps = list(range(actual.shape[0]))
    for j, name in enumerate(report.variables):
        line_chart(out / f"overlay_{name}.svg",
                   [("ground truth", steps, actual[:, j].tolist()),
                    ("predicted", steps, predicted[:, j].tolist())],
                   f"{name}: prediction vs ground truth", "frame", name)
    return 0


def _sweep_task(payload):
    config, method, fraction, seed = payload
    try:
        result = E.run_method(config, method, fraction, seed)
        return (method, fraction, seed, result.report, None)
    except Exception as exc:  # recorded, sweep continues
        return (method, fraction, seed, None, f"{type(exc).__name__}: {exc}")


def _run_tasks(tasks, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_task, tasks))
    return [_sweep_task(t) for t in tasks]


def cmd_sweep_datasize(args) -> int:
    config = _load(args)
    out = _out_dir(args)
    fractions = sorted(config.experiment.fractions)
    seeds = list(config.experiment.seeds)
    if len(fractions) < 3 or len(seeds) < 3:
        print("sweep needs at least 3 fractions and 3 seeds", file=sys.stderr)
        return 2
    tasks = [(config, method, fraction, seed)
             for method in E.METHODS for fraction in fractions for seed in seeds]
    results = _run_tasks(tasks, args.jobs)
    failures = [(m, f, s, err) for m, f, s, _, err in results if err]
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "fraction", "seed", "mean_nrmse", "mean_rmse"])
        for method, fraction, seed, report, err in results:
            if err is None:
                writer.writerow([method, _fmt(fraction), seed,
                                 _fmt(report.mean_nrmse), _fmt(report.mean_rmse)])
    series = []
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "fraction", "nrmse_mean", "nrmse_std",
                         "spearman"])
        for method in E.METHODS:
            means, fracs = [], []
            for fraction in fractions:
                vals = [r.mean_nrmse for m, f, s, r, err in results
                        if err is None and m == method and f == fraction]
                if not vals:
                    continue
                fracs.append(fraction)
                means.append(float(np.mean(vals)))
            if len(fracs) < 3:
                continue
            rho = E.spearman_trend(fracs, means)
            for fraction, mean in zip(fracs, means):
                vals = [r.mean_nrmse for m, f, s, r, err in results
                        if err is None and m == method and f == fraction]
                writer.writerow([method, _fmt(fraction), _fmt(mean),
                                 _fmt(float(np.std(vals))), _fmt(rho)])
            series.append((method, fracs, means))
            trend = "down" if rho <= 0 else "up"
            print(f"{method:18s} spearman(fraction, nRMSE) = {rho:+.3f} ({trend})")
    line_chart(out / "sweep.svg", series, "Test nRMSE vs training fraction",
               "training fraction", "mean nRMSE")
    write_config(config, out / "config.ini")
    if failures:
        with open(out / "failures.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "fraction", "seed", "error"])
            for method, fraction, seed, err in failures:
                writer.writerow([method, _fmt(fraction), seed, err])
        print(f"{len(failures)} runs failed; see failures.csv", file=sys.stderr)
        return 1
    return 0


def _ablate_task(payload):
    config, seed = payload
    arms = {}
    for arm, physics in (("physics", True), ("mse-only", False)):
        trials = E.generate_trials(config, seed)
        train_set, test_set, _ = E.prepare_splits(config, trials, seed)
        model, _, _ = E.train_network(config, train_set, seed, physics=physics)
        test_view = WindowSet(test_set.windows, train_set.stats, test_set.dt)
        arms[arm] = E.evaluate_network(model, test_view, seed, config.split.kind)
    return seed, arms


def cmd_ablate(args) -> int:
    config = _load(args)
    out = _out_dir(args)
    seeds = list(config.experiment.seeds)
    if len(seeds) < 3:
        print("ablation needs at least 3 seeds", file=sys.stderr)
        return 2
    results = []
    for seed in seeds:
        results.append(_ablate_task((config, seed)))
    with open(out / "ablation.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "arm", "variable", "rmse", "cc", "nrmse"])
        for seed, arms in results:
            for arm in ("physics", "mse-only"):
                report = arms[arm]
                for name, r, c, nr in zip(report.variables, report.rmse,
                                          report.cc, report.nrmse):
                    writer.writerow([seed, arm, name, _fmt(r), _fmt(c), _fmt(nr)])
    deltas = [arms["physics"].mean_nrmse - arms["mse-only"].mean_nrmse
              for _, arms in results]
    with open(out / "ablation_deltas.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "delta_mean_nrmse"])
        for (seed, _), delta in zip(results, deltas):
            writer.writerow([seed, _fmt(delta)])
    write_config(config, out / "config.ini")
    mean, std = float(np.mean(deltas)), float(np.std(deltas))
    print(f"paired nRMSE delta (physics - mse-only): "
          f"{mean:+.5f} +/- {std:.5f} over {len(seeds)} seeds")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msk-pinn",
        description="EMG-driven joint dynamics: simulate, train, evaluate.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI experiment config")
        p.add_argument("--out", help="output directory (default $MSK_PINN_OUT or .)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("generate", help="simulate trials and write the dataset")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the network on a generated dataset")
    common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    common(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint prefix")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--split", required=True, help="split manifest from train")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-datasize",
                       help="nRMSE vs training fraction for every method")
    common(p)
    p.set_defaults(func=cmd_sweep_datasize)

    p = sub.add_parser("ablate", help="paired physics-weight ablation")
    common(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
