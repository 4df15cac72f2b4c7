"""
Training configuration shared by every stage.
"""

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

from ..attacks import LOSS_MODES, OTSA_STEPS, AttackConfig, ScattererConfig
from ..autodiff.optim import DEFAULT_MOMENTUM, DEFAULT_WEIGHT_DECAY
from ..data import AugmentConfig
from ..losses import DEFAULT_TEMPERATURE

REGENERATION_POLICIES = ("per-batch", "per-epoch", "once")


@dataclass(frozen=True)
class TrainConfig:
    """
    Hyperparameters for pre-training, fine-tuning and the baselines.

    Attributes:
        epochs: Pre-training / baseline epochs
        finetune_epochs: Fine-tuning epochs; None reuses epochs
        batch_size: Originals per batch (the FACTUAL batch holds 3x as many views)
        lr: SGD learning rate
        momentum: SGD momentum
        weight_decay: L2 weight decay
        temperature: Contrastive temperature tau
        pgd: Attack producing z_img (and the adversarial-training examples)
        otsa: Iterations and loss of the scatterer attack producing z_obj
        scatterers: Scatterer count, width and amplitude bound
        augment: Two-view augmentation strengths
        regeneration: When attacks are regenerated: per-batch, per-epoch or once
        attack_loss: Loss maximized by pre-training attacks (contrastive or classifier)
        freeze_encoder: Fine-tune only the linear classifier
        clean_only: Fine-tune on clean images only
        seed: Base seed for initialization, shuffling, augmentation and attacks
        threads: Worker cap for attack generation
        checkpoint_dir: When set, every stage saves its final params there
    """

    epochs: int = 10
    finetune_epochs: Optional[int] = None
    batch_size: int = 32
    lr: float = 0.05
    momentum: float = DEFAULT_MOMENTUM
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    temperature: float = DEFAULT_TEMPERATURE
    pgd: AttackConfig = field(default_factory=AttackConfig)
    otsa: AttackConfig = field(default_factory=lambda: AttackConfig(steps=OTSA_STEPS))
    scatterers: ScattererConfig = field(default_factory=ScattererConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    regeneration: str = "per-batch"
    attack_loss: str = "contrastive"
    freeze_encoder: bool = False
    clean_only: bool = False
    seed: int = 0
    threads: Optional[int] = 1
    checkpoint_dir: Optional[str] = None

    def validate(self) -> "TrainConfig":
        if self.epochs < 1 or (self.finetune_epochs is not None and self.finetune_epochs < 1):
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2 original images, got {self.batch_size}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.regeneration not in REGENERATION_POLICIES:
            raise ValueError(
                f"Invalid regeneration policy '{self.regeneration}'. "
                f"Must be one of: {', '.join(REGENERATION_POLICIES)}"
            )
        if self.attack_loss not in LOSS_MODES:
            raise ValueError(f"Invalid attack_loss '{self.attack_loss}'. Must be one of: {', '.join(LOSS_MODES)}")
        self.pgd.validate()
        self.otsa.validate()
        self.scatterers.validate()
        return self

    @property
    def resolved_finetune_epochs(self) -> int:
        return self.finetune_epochs if self.finetune_epochs is not None else self.epochs

    def checkpoint_path(self, stage: str) -> Optional[Path]:
        return Path(self.checkpoint_dir) / f"{stage}.fctc" if self.checkpoint_dir else None

    def with_changes(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["pgd"] = self.pgd.to_dict()
        data["otsa"] = self.otsa.to_dict()
        data["scatterers"] = self.scatterers.to_dict()
        data["augment"] = self.augment.to_dict()
        return data
