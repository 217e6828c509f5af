"""Shared experiment orchestration: dataset assembly, single runs, sweeps.

Every run is a pure function of (config, seed): the seed drives dataset
generation, the train/test split, training-set subsampling, parameter
initialization, and the window sampling order.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import baselines as B
from . import network as N
from .config import ExperimentConfig
from .data import SplitSpec, WindowSet, build_splits
from .metrics import EvalReport, evaluate_outputs
from .simulator import SimConfig, Trial, generate_dataset, knee_config, wrist_config

METHODS = ("physics-informed", "mse-only", "elm", "ridge")


class ExperimentError(Exception):
    pass


def make_sim_config(config: ExperimentConfig) -> SimConfig:
    preset = wrist_config if config.simulator.preset == "wrist" else knee_config
    return preset(
        duration=config.simulator.duration,
        rate=config.simulator.rate,
        snr=config.simulator.snr,
        resample_frames=config.simulator.resample_frames,
    )


def generate_trials(config: ExperimentConfig, seed: int) -> list[Trial]:
    return generate_dataset(make_sim_config(config),
                            config.simulator.trials_per_speed,
                            list(config.simulator.speeds), seed=seed)


def prepare_splits(config: ExperimentConfig, trials: list[Trial],
                   seed: int) -> tuple[WindowSet, WindowSet, dict]:
    spec = SplitSpec(config.split.kind, config.split.fraction, seed)
    return build_splits(trials, spec, config.data.window, config.data.stride)


def subsample_windows(window_set: WindowSet, fraction: float,
                      seed: int) -> WindowSet:
    """Keep a seeded random subset of windows; stats are refit on the subset
    so reduced-data runs see no statistics from discarded windows."""
    from .data import fit_stats

    if not 0.0 < fraction <= 1.0:
        raise ExperimentError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return window_set
    n = len(window_set)
    keep = max(1, int(round(fraction * n)))
    order = np.random.default_rng((seed, 17)).permutation(n)[:keep]
    windows = tuple(window_set.windows[i] for i in sorted(order))
    return WindowSet(windows, fit_stats(list(windows)), window_set.dt)


def variable_names(n_muscles: int) -> tuple[str, ...]:
    return tuple(f"force_{i + 1}" for i in range(n_muscles)) + ("theta",)


def network_layers(config: ExperimentConfig):
    if config.model.kind == "deeper":
        return N.deeper_layers()
    return N.default_layers()


def train_network(config: ExperimentConfig, train_set: WindowSet, seed: int,
                  physics: bool = True):
    """Train the CNN; `physics=False` forces the MSE-only ablation."""
    n_channels = train_set.windows[0].inputs.shape[0]
    n_outputs = train_set.windows[0].targets.shape[1]
    model = N.build_network(network_layers(config), n_channels,
                            config.data.window, n_outputs, seed=seed)
    weights = config.loss if physics else replace(config.loss, physics=0.0)
    dynamics = make_sim_config(config).dynamics if physics else None
    schedule = replace(config.schedule, seed=seed)
    history = N.train(model, train_set, weights, dynamics, schedule)
    return model, history, weights


def evaluate_network(model, test_set: WindowSet, seed: int,
                     split: str) -> EvalReport:
    actual, predicted = N.predict_windows(model, test_set)
    names = variable_names(actual.shape[1] - 1)
    return evaluate_outputs(actual, predicted, names, seed, split)


def run_baseline(config: ExperimentConfig, train_set: WindowSet,
                 test_set: WindowSet, kind: str, seed: int) -> EvalReport:
    x_train, y_train = B.window_matrix(train_set)
    x_test, y_test = B.window_matrix(test_set)
    if kind == "elm":
        model = B.elm_train(x_train, y_train, hidden=config.model.hidden,
                            ridge=config.model.ridge, seed=seed)
        predicted = B.elm_predict(model, x_test)
    elif kind == "ridge":
        model = B.ridge_train(x_train, y_train, ridge=config.model.ridge)
        predicted = B.ridge_predict(model, x_test)
    else:
        raise ExperimentError(f"unknown baseline '{kind}'")
    names = variable_names(y_test.shape[1] - 1)
    return evaluate_outputs(y_test, predicted, names, seed, config.split.kind)


@dataclass(frozen=True)
class RunResult:
    method: str
    fraction: float
    seed: int
    report: EvalReport


def run_method(config: ExperimentConfig, method: str, fraction: float,
               seed: int) -> RunResult:
    """One self-contained experiment cell: generate, split, subsample,
    train, evaluate."""
    if method not in METHODS:
        raise ExperimentError(f"unknown method '{method}'; choose from {METHODS}")
    trials = generate_trials(config, seed)
    train_set, test_set, _ = prepare_splits(config, trials, seed)
    train_set = subsample_windows(train_set, fraction, seed)
    if method in ("physics-informed", "mse-only"):
        model, _, _ = train_network(config, train_set, seed,
                                    physics=(method == "physics-informed"))
        # test windows must be scored with the training-set normalization
        test_view = WindowSet(test_set.windows, train_set.stats, test_set.dt)
        report = evaluate_network(model, test_view, seed, config.split.kind)
    else:
        report = run_baseline(config, train_set, test_set, method, seed)
    return RunResult(method, fraction, seed, report)


def spearman_trend(fractions, values) -> float:
    """Spearman rank correlation of training fraction vs. metric."""
    from scipy.stats import spearmanr

    rho = spearmanr(fractions, values).statistic
    return float(rho)
