"""Reference regressors for the comparison table.

An extreme learning machine (random frozen sigmoid layer with a closed-form
ridge-solved readout) and plain ridge regression. Both consume flattened
window features and predict the window's center-sample targets; they are not
sequence models, so this aligns their scores with the network's per-step
metrics.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import WindowSet

DEFAULT_HIDDEN = 512
DEFAULT_RIDGE = 1e-3


class BaselineError(Exception):
    pass


@dataclass(frozen=True)
class ElmModel:
    input_weights: np.ndarray   # [H, d], random and frozen
    biases: np.ndarray          # [H]
    output_weights: np.ndarray  # [H, m], exact regularized least-squares solution
    hidden: int
    ridge: float
    seed: int


@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray         # [d, m]
    ridge: float


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def _check_xy(x: np.ndarray, y: np.ndarray) -> None:
    if x.ndim != 2 or y.ndim != 2:
        raise BaselineError(f"expected 2-d X and Y, got {x.shape} and {y.shape}")
    if x.shape[0] != y.shape[0]:
        raise BaselineError(
            f"X has {x.shape[0]} rows but Y has {y.shape[0]}"
        )


def elm_features(model: ElmModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_weights.shape[1]:
        raise BaselineError(
            f"expected features of width {model.input_weights.shape[1]}, "
            f"got shape {x.shape}"
        )
    return _sigmoid(x @ model.input_weights.T + model.biases)


def elm_train(x, y, hidden: int = DEFAULT_HIDDEN, ridge: float = DEFAULT_RIDGE,
              seed: int = 0) -> ElmModel:
    """Fit the readout of a random-sigmoid-layer network in closed form.

    Hidden weights and biases are uniform(-1, 1), drawn per unit so feature
    sets are nested across widths for a fixed seed.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_xy(x, y)
    if hidden < 1:
        raise BaselineError(f"hidden width must be >= 1, got {hidden}")
    if ridge < 0:
        raise BaselineError(f"ridge coefficient must be >= 0, got {ridge}")
    d = x.shape[1]
    draws = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(hidden, d + 1))
    model = ElmModel(draws[:, :d], draws[:, d], np.empty(0), hidden, ridge, seed)
    g = elm_features(model, x)
    s = x.shape[0]
    try:
        if s > hidden:
            beta = np.linalg.solve(g.T @ g + ridge * np.eye(hidden), g.T @ y)
        else:
            # dual form keeps the ridge=0 interpolation regime solvable
            beta = g.T @ np.linalg.solve(g @ g.T + ridge * np.eye(s), y)
    except np.linalg.LinAlgError as exc:
        raise BaselineError(
            f"singular readout system ({exc}); use ridge > 0"
        ) from exc
    return ElmModel(model.input_weights, model.biases, beta, hidden, ridge, seed)


def elm_predict(model: ElmModel, x) -> np.ndarray:
    return elm_features(model, np.asarray(x, dtype=np.float64)) @ model.output_weights


def ridge_train(x, y, ridge: float) -> RidgeModel:
    """Closed-form ridge regression on raw features, no intercept."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_xy(x, y)
    if ridge <= 0:
        raise BaselineError(f"ridge coefficient must be > 0, got {ridge}")
    d = x.shape[1]
    weights = np.linalg.solve(x.T @ x + ridge * np.eye(d), x.T @ y)
    return RidgeModel(weights, ridge)


def ridge_predict(model: RidgeModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.weights.shape[0]:
        raise BaselineError(
            f"expected features of width {model.weights.shape[0]}, got shape {x.shape}"
        )
    return x @ model.weights


def window_matrix(window_set: WindowSet, bias_column: bool = True
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Flatten each window's input channels into one feature row and pick the
    center-sample targets (physical units).

    Returns (X [S, channels*W (+1)], Y [S, n_targets]). The optional constant
    column gives the intercept-free solvers an affine term.
    """
    x = np.stack([w.inputs.reshape(-1) for w in window_set.windows])
    if bias_column:
        x = np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)
    center = window_set.windows[0].inputs.shape[1] // 2
    y = np.stack([w.targets[center] for w in window_set.windows])
    return x, y
