"""INI experiment configuration with strict key validation.

Every run is fully determined by (config file, seed); the resolved config is
echoed into the output directory so results stay reproducible.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .data import SplitSpec
from .metrics import LossWeights
from .network import TrainSchedule


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class SimulatorSection:
    preset: str = "wrist"              # wrist | knee
    duration: float = 4.0
    rate: float = 1000.0
    snr: float = 3.0
    resample_frames: int = 100
    speeds: tuple = (0.8, 1.0, 1.2, 1.4)
    trials_per_speed: int = 8

    def __post_init__(self):
        if self.preset not in ("wrist", "knee"):
            raise ConfigError(f"unknown simulator preset '{self.preset}'")
        if not self.speeds or self.trials_per_speed < 1:
            raise ConfigError("need at least one speed and one trial per speed")


@dataclass(frozen=True)
class ModelSection:
    kind: str = "network"              # network | deeper | elm | ridge
    hidden: int = 512                  # elm width
    ridge: float = 1e-3                # elm / ridge coefficient

    def __post_init__(self):
        if self.kind not in ("network", "deeper", "elm", "ridge"):
            raise ConfigError(f"unknown model kind '{self.kind}'")


@dataclass(frozen=True)
class DataSection:
    window: int = 100
    stride: int = 10


@dataclass(frozen=True)
class ExperimentSection:
    seeds: tuple = (0, 1, 2, 3, 4)
    fractions: tuple = (0.1, 0.25, 0.5, 0.75, 1.0)

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if any(not 0.0 < f <= 1.0 for f in self.fractions):
            raise ConfigError("fractions must lie in (0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    simulator: SimulatorSection = field(default_factory=SimulatorSection)
    model: ModelSection = field(default_factory=ModelSection)
    loss: LossWeights = field(default_factory=lambda: LossWeights(1.0, 1.0, 1e-3))
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    split: SplitSpec = field(default_factory=lambda: SplitSpec("by-trial", 0.8, 0))
    data: DataSection = field(default_factory=DataSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)


_SCHEMA = {
    "simulator": {"preset": str, "duration": float, "rate": float, "snr": float,
                  "resample_frames": int, "speeds": "floats",
                  "trials_per_speed": int},
    "model": {"kind": str, "hidden": int, "ridge": float},
    "loss": {"force": float, "angle": float, "physics": float},
    "schedule": {"max_iter": int, "learning_rate": float, "momentum": float},
    "split": {"kind": str, "fraction": float},
    "data": {"window": int, "stride": int},
    "experiment": {"seeds": "ints", "fractions": "floats"},
}


def _convert(raw: str, kind, section: str, key: str):
    try:
        if kind == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind == "ints":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc


def load_config(path, seed: int = 0) -> ExperimentConfig:
    """Parse an INI file; unknown sections or keys are hard errors."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            values[section][key] = _convert(raw, _SCHEMA[section][key], section, key)
    return build_config(values, seed)


def build_config(values: dict, seed: int = 0) -> ExperimentConfig:
    sim = SimulatorSection(**values.get("simulator", {}))
    model = ModelSection(**values.get("model", {}))
    loss_kw = values.get("loss", {})
    loss = LossWeights(loss_kw.get("force", 1.0), loss_kw.get("angle", 1.0),
                       loss_kw.get("physics", 1e-3))
    sched = TrainSchedule(seed=seed, batch=1, **values.get("schedule", {}))
    split_kw = values.get("split", {})
    split = SplitSpec(split_kw.get("kind", "by-trial"),
                      split_kw.get("fraction", 0.8), seed)
    data = DataSection(**values.get("data", {}))
    exp = ExperimentSection(**values.get("experiment", {}))
    return ExperimentConfig(sim, model, loss, sched, split, data, exp)


def write_config(config: ExperimentConfig, path) -> None:
    """Echo the fully resolved configuration (deterministic key order)."""
    parser = configparser.ConfigParser()
    parser["simulator"] = {
        "preset": config.simulator.preset,
        "duration": repr(config.simulator.duration),
        "rate": repr(config.simulator.rate),
        "snr": repr(config.simulator.snr),
        "resample_frames": str(config.simulator.resample_frames),
        "speeds": ",".join(repr(s) for s in config.simulator.speeds),
        "trials_per_speed": str(config.simulator.trials_per_speed),
    }
    parser["model"] = {
        "kind": config.model.kind,
        "hidden": str(config.model.hidden),
        "ridge": repr(config.model.ridge),
    }
    parser["loss"] = {
        "force": repr(config.loss.force),
        "angle": repr(config.loss.angle),
        "physics": repr(config.loss.physics),
    }
    parser["schedule"] = {
        "max_iter": str(config.schedule.max_iter),
        "learning_rate": repr(config.schedule.learning_rate),
        "momentum": repr(config.schedule.momentum),
    }
    parser["split"] = {
        "kind": config.split.kind,
        "fraction": repr(config.split.fraction),
    }
    parser["data"] = {
        "window": str(config.data.window),
        "stride": str(config.data.stride),
    }
    parser["experiment"] = {
        "seeds": ",".join(str(s) for s in config.experiment.seeds),
        "fractions": ",".join(repr(f) for f in config.experiment.fractions),
    }
    with open(path, "w") as fh:
        parser.write(fh)
