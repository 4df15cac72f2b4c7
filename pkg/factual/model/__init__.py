"""
Encoder, projector and linear classifier, with their parameters and checkpoints.
"""

from .params import ArchitectureConfig, BoundParams, ModelParams, init_params
from .network import accuracy, classify, encode, predict, project
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "ArchitectureConfig",
    "ModelParams",
    "BoundParams",
    "init_params",
    "encode",
    "project",
    "classify",
    "predict",
    "accuracy",
    "save_checkpoint",
    "load_checkpoint",
]
