"""SimAD: patch-based reconstruction anomaly detection for multivariate time
series, plus event-aware evaluation metrics."""

from .errors import (CheckpointError, ConfigError, ContractError, DataFormatError, DimensionError,
                     GenerationError, SimADError, TrainingError, UndefinedMetricError)
from .model import ModelConfig, SimAD, score_series
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = ["ModelConfig", "SimAD", "score_series", "TrainConfig", "train", "SimADError",
           "DimensionError", "ContractError", "ConfigError", "UndefinedMetricError",
           "TrainingError", "CheckpointError", "GenerationError", "DataFormatError"]
