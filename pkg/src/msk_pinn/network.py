"""Sequence-to-sequence convolutional regressor and its training loop.

The default architecture is one convolutional block (128 kernels of size 3,
padding 3, stride 1, output center-cropped back to the window length; ReLU,
per-channel temporal normalization, dropout 0.3), two fully connected blocks
of 128 nodes applied per time step, and a linear regression head emitting
N forces plus the joint angle at every step. Training is plain stochastic
gradient descent with momentum on one window per iteration.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import tensor as T
from .data import WindowSet, normalize
from .metrics import LossBreakdown, LossWeights
from .physics import DynamicsParams, physics_loss
from .tensor import Tensor


class NetworkError(Exception):
    pass


class TrainingError(NetworkError):
    pass


CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    kind: str                 # "conv" | "fc" | "regression"
    size: int = 128           # kernel count or hidden nodes; ignored for regression
    kernel_size: int = 3
    padding: int = 3
    stride: int = 1
    dropout: float = 0.3

    def __post_init__(self):
        if self.kind not in ("conv", "fc", "regression"):
            raise NetworkError(f"unknown layer kind '{self.kind}'")
        if self.kind != "regression" and self.size < 1:
            raise NetworkError(f"layer size must be positive, got {self.size}")
        if not 0.0 <= self.dropout < 1.0:
            raise NetworkError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.kind == "conv":
            if self.kernel_size < 1 or self.stride < 1 or self.padding < 0:
                raise NetworkError(f"invalid conv geometry in {self}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "size": self.size, "kernel_size": self.kernel_size,
                "padding": self.padding, "stride": self.stride, "dropout": self.dropout}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(**d)


def default_layers() -> tuple[LayerSpec, ...]:
    """One conv block, two FC blocks, one regression head."""
    return (LayerSpec("conv"), LayerSpec("fc"), LayerSpec("fc"), LayerSpec("regression"))


def deeper_layers() -> tuple[LayerSpec, ...]:
    """Three conv blocks and three FC blocks (plain-CNN baseline variant)."""
    return (LayerSpec("conv"),) * 3 + (LayerSpec("fc"),) * 3 + (LayerSpec("regression"),)


@dataclass
class NetworkModel:
    layers: tuple[LayerSpec, ...]
    in_channels: int
    window: int
    n_outputs: int
    seed: int
    params: dict[str, Tensor]
    training: bool = False

    def parameter_count(self) -> int:
        return sum(p.values.size for p in self.params.values())

    def forward(self, inputs, rng: np.random.Generator | None = None) -> Tensor:
        """Map one input window [in_channels, W] to predictions [W, n_outputs].

        Dropout draws from `rng` in training mode; pass a freshly seeded
        generator for reproducible outputs.
        """
        x = inputs if isinstance(inputs, Tensor) else Tensor(np.asarray(inputs))
        if x.shape != (self.in_channels, self.window):
            raise NetworkError(
                f"forward: expected input shape {(self.in_channels, self.window)}, "
                f"got {x.shape}"
            )
        if self.training and rng is None:
            rng = np.random.default_rng(self.seed)
        for i, spec in enumerate(self.layers, start=1):
            name = f"{spec.kind}{i}"
            if spec.kind == "conv":
                x = T.conv1d(x, self.params[f"{name}.kernels"],
                             self.params[f"{name}.bias"], spec.padding, spec.stride)
                l_out = x.shape[1]
                if l_out > self.window:
                    x = T.narrow(x, (l_out - self.window) // 2, self.window)
                x = T.relu(x)
                x = T.seq_norm(x, self.params[f"{name}.gain"],
                               self.params[f"{name}.shift"])
                x = T.dropout(x, spec.dropout, self.training, rng)
            elif spec.kind == "fc":
                x = T.dense(x, self.params[f"{name}.weights"], self.params[f"{name}.bias"])
                x = T.relu(x)
                x = T.feature_norm(x, self.params[f"{name}.gain"],
                                   self.params[f"{name}.shift"])
                x = T.dropout(x, spec.dropout, self.training, rng)
            else:
                x = T.dense(x, self.params[f"{name}.weights"], self.params[f"{name}.bias"])
        return T.transpose2d(x)


def _fan_uniform(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


def build_network(layers, in_channels: int, window: int, n_outputs: int,
                  seed: int) -> NetworkModel:
    """Initialize parameters (seeded uniform fan-based scheme for weights,
    zeros for biases/shifts, ones for normalization gains)."""
    layers = tuple(layers)
    if window < 3:
        raise NetworkError(f"window length must be >= 3, got {window}")
    if in_channels < 1 or n_outputs < 1:
        raise NetworkError("channel and output counts must be positive")
    if not layers or layers[-1].kind != "regression":
        raise NetworkError("layer stack must end with a regression head")
    if any(spec.kind == "regression" for spec in layers[:-1]):
        raise NetworkError("regression head must be the final layer")

    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}
    channels = in_channels
    for i, spec in enumerate(layers, start=1):
        name = f"{spec.kind}{i}"
        if spec.kind == "conv":
            k = spec.kernel_size
            l_out = (window + 2 * spec.padding - k) // spec.stride + 1
            if l_out < window:
                raise NetworkError(
                    f"layer {name}: output length {l_out} shorter than window "
                    f"{window}; increase padding or reduce stride"
                )
            shape = (spec.size, channels, k)
            params[f"{name}.kernels"] = Tensor(
                _fan_uniform(rng, shape, channels * k, spec.size * k), requires_grad=True)
            params[f"{name}.bias"] = Tensor(np.zeros(spec.size), requires_grad=True)
            params[f"{name}.gain"] = Tensor(np.ones(spec.size), requires_grad=True)
            params[f"{name}.shift"] = Tensor(np.zeros(spec.size), requires_grad=True)
            channels = spec.size
        elif spec.kind == "fc":
            shape = (spec.size, channels)
            params[f"{name}.weights"] = Tensor(
                _fan_uniform(rng, shape, channels, spec.size), requires_grad=True)
            params[f"{name}.bias"] = Tensor(np.zeros(spec.size), requires_grad=True)
            params[f"{name}.gain"] = Tensor(np.ones(spec.size), requires_grad=True)
            params[f"{name}.shift"] = Tensor(np.zeros(spec.size), requires_grad=True)
            channels = spec.size
        else:
            shape = (n_outputs, channels)
            params[f"{name}.weights"] = Tensor(
                _fan_uniform(rng, shape, channels, n_outputs), requires_grad=True)
            params[f"{name}.bias"] = Tensor(np.zeros(n_outputs), requires_grad=True)
    return NetworkModel(layers, in_channels, window, n_outputs, seed, params)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

@dataclass
class SgdmState:
    learning_rate: float = 0.01
    momentum: float = 0.9
    velocities: dict[str, np.ndarray] = field(default_factory=dict)
    iteration: int = 0


def sgdm_step(model: NetworkModel, grads: dict[str, np.ndarray],
              state: SgdmState) -> None:
    """One momentum update: v <- mu*v - lr*g; p <- p + v."""
    for name, param in model.params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != param.shape:
            raise TrainingError(
                f"gradient for '{name}' has shape {g.shape}, expected {param.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter '{name}'")
        v = state.velocities.get(name)
        if v is None:
            v = np.zeros(param.shape)
        v = state.momentum * v - state.learning_rate * g
        state.velocities[name] = v
        model.params[name] = Tensor(param.values + v, requires_grad=True)
    state.iteration += 1


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainSchedule:
    max_iter: int = 1200
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.batch != 1:
            raise NetworkError("only batch size 1 is supported")
        if self.max_iter < 0 or self.learning_rate <= 0:
            raise NetworkError("invalid schedule")


def window_losses(model: NetworkModel, window_set: WindowSet, index: int,
                  dynamics: DynamicsParams | None,
                  rng: np.random.Generator | None = None):
    """Forward one window and build the three loss terms as graph tensors.

    Data terms live in normalized target space; the physics residual is
    evaluated on denormalized (physical-unit) predictions.
    """
    win = window_set.windows[index]
    stats = window_set.stats
    n_forces = model.n_outputs - 1
    pred = model.forward(win.inputs, rng=rng)
    target = Tensor(normalize(win.targets, stats))
    w = model.window

    pred_f = T.narrow(pred, 0, n_forces, axis=1)
    pred_th = T.reshape(T.narrow(pred, n_forces, 1, axis=1), (w,))
    target_f = T.narrow(target, 0, n_forces, axis=1)
    target_th = T.reshape(T.narrow(target, n_forces, 1, axis=1), (w,))

    loss_force = T.scale(T.tsum(T.square(T.sub(target_f, pred_f))), 1.0 / w)
    loss_angle = T.tmean(T.square(T.sub(target_th, pred_th)))

    loss_physics = None
    if dynamics is not None:
        phys_f = T.affine_cols(pred_f, stats.std[:n_forces], stats.mean[:n_forces])
        phys_th = T.add(T.scale(pred_th, float(stats.std[n_forces])),
                        float(stats.mean[n_forces]))
        params_at_dt = replace(dynamics, dt=window_set.dt)
        loss_physics = physics_loss(phys_th, phys_f, params_at_dt)
    return loss_force, loss_angle, loss_physics


def train(model: NetworkModel, window_set: WindowSet, weights: LossWeights,
          dynamics: DynamicsParams | None,
          schedule: TrainSchedule) -> list[LossBreakdown]:
    """Run `max_iter` single-window updates; returns the per-iteration loss
    history and leaves the model in eval mode."""
    if len(window_set) == 0:
        raise TrainingError("empty training set")
    if weights.physics > 0 and dynamics is None:
        raise TrainingError("physics weight > 0 requires dynamics parameters")
    rng = np.random.default_rng(schedule.seed)
    state = SgdmState(schedule.learning_rate, schedule.momentum)
    history: list[LossBreakdown] = []
    model.training = True
    try:
        for it in range(schedule.max_iter):
            index = int(rng.integers(len(window_set)))
            try:
                loss_f, loss_th, loss_p = window_losses(
                    model, window_set, index, dynamics, rng=rng)
                total = T.add(T.scale(loss_f, weights.force),
                              T.scale(loss_th, weights.angle))
                if loss_p is not None and weights.physics > 0:
                    total = T.add(total, T.scale(loss_p, weights.physics))
                grad_map = T.backward(total)
            except T.NumericsError as exc:
                raise TrainingError(f"non-finite loss at iteration {it}: {exc}") from exc
            grads = {name: grad_map[p] for name, p in model.params.items()
                     if p in grad_map}
            sgdm_step(model, grads, state)
            history.append(LossBreakdown.combine(
                loss_f.item(), loss_th.item(),
                loss_p.item() if loss_p is not None else 0.0, weights))
    finally:
        model.training = False
    return history


def predict_windows(model: NetworkModel, window_set: WindowSet,
                    indices=None) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode predictions pooled over windows.

    Returns (actual, predicted) as [S, n_outputs] arrays in physical units.
    """
    from .data import denormalize

    if indices is None:
        indices = range(len(window_set))
    was_training = model.training
    model.training = False
    actual, predicted = [], []
    try:
        for i in indices:
            win = window_set.windows[i]
            pred_norm = model.forward(win.inputs).values
            predicted.append(denormalize(pred_norm, window_set.stats))
            actual.append(win.targets)
    finally:
        model.training = was_training
    return np.concatenate(actual, axis=0), np.concatenate(predicted, axis=0)


# ---------------------------------------------------------------------------
# checkpoints: JSON manifest + flat CSV of parameters
# ---------------------------------------------------------------------------

def save_checkpoint(model: NetworkModel, stats, dt: float, prefix) -> None:
    prefix = Path(prefix)
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "layers": [spec.to_dict() for spec in model.layers],
        "in_channels": model.in_channels,
        "window": model.window,
        "n_outputs": model.n_outputs,
        "seed": model.seed,
        "stats_mean": [float(v) for v in stats.mean],
        "stats_std": [float(v) for v in stats.std],
        "dt": dt,
        "params_file": prefix.name + ".params.csv",
    }
    with open(prefix.with_suffix(".json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(prefix.parent / manifest["params_file"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "index", "value"])
        for name in sorted(model.params):
            flat = model.params[name].values.reshape(-1)
            for i, v in enumerate(flat):
                writer.writerow([name, i, repr(float(v))])


def load_checkpoint(prefix):
    """Returns (model, stats, dt) from a checkpoint prefix."""
    from .data import NormStats

    prefix = Path(prefix)
    with open(prefix.with_suffix(".json")) as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise NetworkError(
            f"unsupported checkpoint format {manifest.get('format_version')}"
        )
    layers = tuple(LayerSpec.from_dict(d) for d in manifest["layers"])
    model = build_network(layers, manifest["in_channels"], manifest["window"],
                          manifest["n_outputs"], manifest["seed"])
    values: dict[str, list[float]] = {name: [] for name in model.params}
    with open(prefix.parent / manifest["params_file"], newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["parameter", "index", "value"]:
            raise NetworkError(f"bad checkpoint parameter file header: {header}")
        for name, index, value in reader:
            if name not in values:
                raise NetworkError(f"checkpoint has unknown parameter '{name}'")
            values[name].append(float(value))
    for name, flat in values.items():
        shape = model.params[name].shape
        arr = np.asarray(flat).reshape(shape)
        model.params[name] = Tensor(arr, requires_grad=True)
    stats = NormStats(np.asarray(manifest["stats_mean"]),
                      np.asarray(manifest["stats_std"]))
    return model, stats, float(manifest["dt"])
