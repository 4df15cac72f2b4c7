"""
Pre-training, fine-tuning, baselines and evaluation.
"""

from .config import REGENERATION_POLICIES, TrainConfig
from .training import (
    TrainingResult,
    ViewBatch,
    check_batch_composition,
    finetune,
    pretrain,
    run_adversarial_training,
    run_standard_training,
)
from .evaluation import MetricsReport, evaluate, weighted_accuracy, write_report

__all__ = [
    "REGENERATION_POLICIES",
    "TrainConfig",
    "TrainingResult",
    "ViewBatch",
    "check_batch_composition",
    "pretrain",
    "finetune",
    "run_standard_training",
    "run_adversarial_training",
    "MetricsReport",
    "evaluate",
    "weighted_accuracy",
    "write_report",
]
