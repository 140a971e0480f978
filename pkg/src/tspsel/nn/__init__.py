"""Minimal float64 neural-network kernel for the selector CNN."""

from .checkpoint import load_checkpoint, save_checkpoint
from .layers import softmax
from .model import ModelConfig, backward, forward, init_params, param_count
from .optim import AdamState, adam_step, decay_on_plateau

__all__ = [
    "AdamState",
    "ModelConfig",
    "adam_step",
    "backward",
    "decay_on_plateau",
    "forward",
    "init_params",
    "load_checkpoint",
    "param_count",
    "save_checkpoint",
    "softmax",
]
