"""EMG-driven joint dynamics: a physics-informed sequence regressor with a
forward-dynamics simulator as its verification oracle."""

__version__ = "1.0.0"

from .data import SplitSpec, Window, WindowSet
from .metrics import EvalReport, LossBreakdown, LossWeights
from .network import NetworkModel, TrainSchedule, build_network, train
from .physics import DynamicsParams
from .simulator import SimConfig, Trial, generate_dataset, knee_config, wrist_config
from .tensor import Tensor

__all__ = [
    "DynamicsParams", "EvalReport", "LossBreakdown", "LossWeights",
    "NetworkModel", "SimConfig", "SplitSpec", "Tensor", "TrainSchedule",
    "Trial", "Window", "WindowSet", "build_network", "generate_dataset",
    "knee_config", "train", "wrist_config", "__version__",
]
