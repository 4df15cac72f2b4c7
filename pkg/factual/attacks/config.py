"""
Attack configuration and perturbation containers.
"""

from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

LOSS_MODES = ("classifier", "contrastive")

DEFAULT_EPSILON = 8 / 255
PGD_STEPS = 7
OTSA_STEPS = 10


@dataclass(frozen=True)
class AttackConfig:
    """
    Budget and schedule of a gradient attack.

    Attributes:
        epsilon: L-infinity budget in pixel units
        steps: Iteration count
        step_size: Per-iteration magnitude; None means 2.5 * epsilon / steps
        random_start: Start from a uniform draw inside the budget
        rng_seed: Seed for the random start / scatterer initialization
        loss_mode: Maximized loss, 'classifier' (cross-entropy) or 'contrastive'
    """

    epsilon: float = DEFAULT_EPSILON
    steps: int = PGD_STEPS
    step_size: Optional[float] = None
    random_start: bool = True
    rng_seed: int = 0
    loss_mode: str = "classifier"

    def validate(self) -> "AttackConfig":
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.step_size is not None and self.step_size <= 0 and self.epsilon > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"Invalid loss_mode '{self.loss_mode}'. Must be one of: {', '.join(LOSS_MODES)}")
        return self

    @property
    def resolved_step_size(self) -> float:
        return self.step_size if self.step_size is not None else 2.5 * self.epsilon / self.steps

    def with_changes(self, **changes) -> "AttackConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ScattererConfig:
    """
    Scatterer surrogate parameters.

    Attributes:
        count: Scatterers per image K
        sigma: Gaussian kernel width in pixels
        amplitude_max: Upper amplitude bound a_max (amplitudes live in [0, a_max])
        position_step: Position move per iteration, in pixels
        amplitude_step: Amplitude move per iteration; None means 2.5 * a_max / steps
    """

    count: int = 3
    sigma: float = 1.0
    amplitude_max: float = 0.3
    position_step: float = 0.5
    amplitude_step: Optional[float] = None

    def validate(self) -> "ScattererConfig":
        if self.count < 1:
            raise ValueError(f"scatterer count must be >= 1, got {self.count}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.amplitude_max < 0:
            raise ValueError(f"amplitude_max must be >= 0, got {self.amplitude_max}")
        if self.position_step < 0:
            raise ValueError(f"position_step must be >= 0, got {self.position_step}")
        return self

    @property
    def radius(self) -> int:
        return int(np.ceil(3 * self.sigma))

    def resolved_amplitude_step(self, steps: int) -> float:
        return self.amplitude_step if self.amplitude_step is not None else 2.5 * self.amplitude_max / steps

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class Perturbation:
    """
    Additive perturbation of a batch of images.

    Attributes:
        delta: (B, H, W) change, already accounting for the [0, 1] clip
        support: (B, H, W) booleans where delta may be nonzero
    """

    delta: np.ndarray
    support: np.ndarray

    def apply(self, images: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(images, dtype=np.float64) + self.delta, 0.0, 1.0)

    @property
    def linf(self) -> float:
        return float(np.max(np.abs(self.delta))) if self.delta.size else 0.0

    def __getitem__(self, index) -> "Perturbation":
        return Perturbation(self.delta[index], self.support[index])
