"""Monostatic MIMO-OFDM 6D sensing: echo synthesis, single-shot estimation and tracking."""

from .config import ExperimentConfig, load_config, load_preset
from .echo import EchoCube
from .estimation import Observation6D, single_shot_sense
from .geometry import SPEED_OF_LIGHT, SpatialDirection, UpaGeometry
from .motion import TargetState6D
from .radar import RadarConfig

__all__ = [
    "SPEED_OF_LIGHT",
    "EchoCube",
    "ExperimentConfig",
    "Observation6D",
    "RadarConfig",
    "SpatialDirection",
    "TargetState6D",
    "UpaGeometry",
    "load_config",
    "load_preset",
    "single_shot_sense",
]

__version__ = "0.1.0"
