"""Optimization, checkpointing and the training loop."""

from ..tensor.initializers import he_init
from .checkpoint import FORMAT_VERSION, MAGIC, load_checkpoint, read_checkpoint, save_checkpoint
from .loop import PreparedSet, TrainConfig, TrainResult, decode_batch, evaluate, train
from .optim import AdaDelta, AdaDeltaState, adadelta_step, clip_gradients, global_norm

__all__ = [
    "FORMAT_VERSION",
    "MAGIC",
    "AdaDelta",
    "AdaDeltaState",
    "PreparedSet",
    "TrainConfig",
    "TrainResult",
    "adadelta_step",
    "clip_gradients",
    "decode_batch",
    "evaluate",
    "global_norm",
    "he_init",
    "load_checkpoint",
    "read_checkpoint",
    "save_checkpoint",
    "train",
]
