"""Windowing, target normalization, and train/test split protocols."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .simulator import Trial


class DataError(Exception):
    pass


@dataclass(frozen=True)
class SplitSpec:
    kind: str          # "by-trial" | "intrasession"
    fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("by-trial", "intrasession"):
            raise DataError(f"unknown split kind '{self.kind}'")
        if not 0.0 < self.fraction < 1.0:
            raise DataError(f"train fraction must be in (0, 1), got {self.fraction}")


@dataclass(frozen=True)
class NormStats:
    """Per-target z-score statistics, fit on the training split only."""

    mean: np.ndarray   # [N+1]
    std: np.ndarray    # [N+1]

    def __post_init__(self):
        if np.any(self.std <= 0):
            raise DataError("zero-variance target; cannot normalize")


@dataclass(frozen=True)
class Window:
    """One training example: input channels and per-step targets.

    inputs: [1+N, W] — normalized position in trial followed by the EMG
    envelopes; targets: [W, N+1] in physical units (N forces then the angle).
    """

    inputs: np.ndarray
    targets: np.ndarray
    trial_index: int
    offset: int
    speed: float


@dataclass(frozen=True)
class WindowSet:
    windows: tuple[Window, ...]
    stats: NormStats
    dt: float

    def __len__(self) -> int:
        return len(self.windows)

    def normalized_targets(self, window: Window) -> np.ndarray:
        return normalize(window.targets, self.stats)


def make_windows(trials: list[Trial], window: int, stride: int) -> list[Window]:
    """Sliding windows per trial; windows never straddle trial boundaries."""
    if window < 3:
        raise DataError(f"window length must be >= 3, got {window}")
    if stride < 1:
        raise DataError(f"stride must be >= 1, got {stride}")
    out = []
    for idx, trial in enumerate(trials):
        n = trial.n_samples
        if n < window:
            raise DataError(
                f"trial {idx} has {n} samples, shorter than window {window}"
            )
        positions = np.arange(n) / (n - 1)
        for offset in range(0, n - window + 1, stride):
            sl = slice(offset, offset + window)
            inputs = np.concatenate(
                [positions[None, sl], trial.emg_env[sl].T], axis=0
            )
            targets = np.concatenate(
                [trial.forces[sl], trial.theta[sl, None]], axis=1
            )
            out.append(Window(inputs, targets, idx, offset, trial.speed))
    return out


def fit_stats(windows: list[Window]) -> NormStats:
    stacked = np.concatenate([w.targets for w in windows], axis=0)
    return NormStats(mean=stacked.mean(axis=0), std=stacked.std(axis=0))


def normalize(targets: np.ndarray, stats: NormStats) -> np.ndarray:
    return (targets - stats.mean) / stats.std


def denormalize(targets: np.ndarray, stats: NormStats) -> np.ndarray:
    return targets * stats.std + stats.mean


def split_trials(trials: list[Trial], spec: SplitSpec) -> tuple[list[int], list[int]]:
    """By-trial split: returns (train, test) trial indices."""
    if len(trials) < 2:
        raise DataError("by-trial split needs at least 2 trials")
    order = np.random.default_rng(spec.seed).permutation(len(trials))
    n_train = int(round(spec.fraction * len(trials)))
    n_train = min(max(n_train, 1), len(trials) - 1)
    return sorted(int(i) for i in order[:n_train]), sorted(int(i) for i in order[n_train:])


def split_windows(n_windows: int, spec: SplitSpec) -> tuple[list[int], list[int]]:
    """Intrasession split: returns (train, test) window indices."""
    if n_windows < 5:
        raise DataError("intrasession split needs at least 5 windows")
    order = np.random.default_rng(spec.seed).permutation(n_windows)
    n_train = int(round(spec.fraction * n_windows))
    n_train = min(max(n_train, 1), n_windows - 1)
    return sorted(int(i) for i in order[:n_train]), sorted(int(i) for i in order[n_train:])


def build_splits(trials: list[Trial], spec: SplitSpec, window: int,
                 stride: int) -> tuple[WindowSet, WindowSet, dict]:
    """Produce train/test WindowSets plus a reproducibility manifest.

    Normalization statistics come exclusively from the training windows;
    the test set reuses them.
    """
    if not trials:
        raise DataError("no trials to split")
    dt = trials[0].dt
    if any(abs(t.dt - dt) > 1e-12 for t in trials):
        raise DataError("trials have inconsistent sampling intervals")
    if spec.kind == "by-trial":
        train_ids, test_ids = split_trials(trials, spec)
        train_windows = [w for w in make_windows(trials, window, stride)
                        if w.trial_index in set(train_ids)]
        test_windows = [w for w in make_windows(trials, window, stride)
                       if w.trial_index in set(test_ids)]
        manifest = {"kind": spec.kind, "fraction": spec.fraction, "seed": spec.seed,
                    "train_trials": train_ids, "test_trials": test_ids}
    else:
        windows = make_windows(trials, window, stride)
        train_ids, test_ids = split_windows(len(windows), spec)
        train_windows = [windows[i] for i in train_ids]
        test_windows = [windows[i] for i in test_ids]
        manifest = {"kind": spec.kind, "fraction": spec.fraction, "seed": spec.seed,
                    "train_windows": train_ids, "test_windows": test_ids}
    if not train_windows or not test_windows:
        raise DataError("split produced an empty side")
    stats = fit_stats(train_windows)
    return (WindowSet(tuple(train_windows), stats, dt),
            WindowSet(tuple(test_windows), stats, dt),
            manifest)


def write_split_manifest(path, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_split_manifest(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    for key in ("kind", "fraction", "seed"):
        if key not in data:
            raise DataError(f"split manifest missing field '{key}'")
    return data
