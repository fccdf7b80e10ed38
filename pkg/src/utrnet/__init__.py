"""Text-line recognition with high-resolution multi-scale CNN features,
a stacked bidirectional LSTM and CTC, implemented on numpy."""

from .data import CharSet, load_dataset
from .estimator import UTRNetRecognizer
from .exceptions import (
    CheckpointError,
    ContractError,
    DataValidationError,
    DimensionError,
    NumericError,
    UTRNetError,
)
from .metrics import EvalReport, char_accuracy, edit_distance
from .model import ModelConfig, UTRNet, build_model

__version__ = "0.1.0"

__all__ = [
    "CharSet",
    "CheckpointError",
    "ContractError",
    "DataValidationError",
    "DimensionError",
    "EvalReport",
    "ModelConfig",
    "NumericError",
    "UTRNet",
    "UTRNetError",
    "UTRNetRecognizer",
    "build_model",
    "char_accuracy",
    "edit_distance",
    "load_dataset",
    "__version__",
]
