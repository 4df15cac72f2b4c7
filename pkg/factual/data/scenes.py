"""
Synthetic SAR-like scenes: background clutter plus one class-specific target,
under multiplicative gamma speckle.
"""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..config import logger
from ..parallel import parallel_map
from ..rng import derive_seed
from .images import MIN_MASK_PIXELS, Dataset, LabeledImage, to_storage

MASK_THRESHOLD = 0.15
MIN_SEMI_AXIS = 2.5


@dataclass(frozen=True)
class ShapeSpec:
    """Fixed per-class target geometry; semi-axes are fractions of the image size."""

    family: str
    length: float
    width: float
    turret: float = 0.0


# one entry per class; pose is randomized per scene
CLASS_SHAPES = (
    ShapeSpec("ellipse", 0.30, 0.10),
    ShapeSpec("rectangle", 0.22, 0.15),
    ShapeSpec("composite", 0.24, 0.10, turret=0.10),
    ShapeSpec("ellipse", 0.16, 0.15),
    ShapeSpec("rectangle", 0.32, 0.07),
    ShapeSpec("composite", 0.18, 0.14, turret=0.13),
    ShapeSpec("ellipse", 0.24, 0.18),
    ShapeSpec("rectangle", 0.14, 0.13),
    ShapeSpec("composite", 0.30, 0.07, turret=0.08),
    ShapeSpec("ellipse", 0.34, 0.06),
)


@dataclass(frozen=True)
class SceneConfig:
    """
    Scene geometry and noise.

    Attributes:
        size: Image height == width (>= 16)
        clutter: Mean background intensity before speckle
        looks: Speckle looks L (>= 1); per-pixel noise has mean 1, variance 1/L
        class_count: Number of target classes C (<= 10)
    """

    size: int = 64
    clutter: float = 0.12
    looks: float = 4.0
    class_count: int = 4

    def validate(self) -> "SceneConfig":
        if self.size < 16:
            raise ValueError(f"invalid geometry: size must be >= 16, got {self.size}")
        if self.looks < 1:
            raise ValueError(f"invalid geometry: looks must be >= 1, got {self.looks}")
        if not 0 <= self.clutter <= 1:
            raise ValueError(f"invalid geometry: clutter must lie in [0, 1], got {self.clutter}")
        if not 2 <= self.class_count <= len(CLASS_SHAPES):
            raise ValueError(f"class_count must lie in [2, {len(CLASS_SHAPES)}], got {self.class_count}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def speckle(shape, looks: float, rng: np.random.Generator) -> np.ndarray:
    """Multiplicative intensity speckle ~ Gamma(L, 1/L): mean 1, variance 1/L."""
    return rng.gamma(shape=looks, scale=1.0 / looks, size=shape)


def _profile(distance: np.ndarray) -> np.ndarray:
    # flat core, soft edge between normalized distance 0.75 and 1.25
    return np.clip((1.25 - distance) / 0.5, 0.0, 1.0)


def target_layer(spec: ShapeSpec, size: int, center, angle: float, brightness: float) -> np.ndarray:
    """Noiseless target intensity for one pose."""
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    dr, dc = rows - center[0], cols - center[1]
    u = dc * np.cos(angle) + dr * np.sin(angle)
    v = -dc * np.sin(angle) + dr * np.cos(angle)
    a = max(spec.length * size, MIN_SEMI_AXIS)
    b = max(spec.width * size, MIN_SEMI_AXIS)

    if spec.family == "ellipse":
        shape = _profile(np.sqrt((u / a) ** 2 + (v / b) ** 2))
    elif spec.family == "rectangle":
        shape = _profile(np.maximum(np.abs(u) / a, np.abs(v) / b))
    elif spec.family == "composite":
        hull = _profile(np.maximum(np.abs(u) / a, np.abs(v) / b))
        radius = max(spec.turret * size, MIN_SEMI_AXIS)
        turret = _profile(np.sqrt((u - 0.35 * a) ** 2 + v ** 2) / radius)
        shape = np.maximum(hull, turret)
    else:
        raise ValueError(f"unknown shape family '{spec.family}'")
    return brightness * shape


def generate_scene(class_id: int, rng_seed: int, geometry: SceneConfig = SceneConfig()) -> LabeledImage:
    """
    Synthesize one labeled scene, deterministic per (class_id, rng_seed, geometry).

    The mask marks pixels where the noiseless target intensity exceeds 0.15.

    Raises:
        ValueError: On invalid geometry or class_id outside [0, C)
    """
    geometry.validate()
    if not 0 <= class_id < geometry.class_count:
        raise ValueError(f"class_id {class_id} out of range for {geometry.class_count} classes")

    rng = np.random.default_rng(rng_seed)
    size = geometry.size
    jitter = size / 8.0
    center = (size / 2.0 + rng.uniform(-jitter, jitter), size / 2.0 + rng.uniform(-jitter, jitter))
    angle = rng.uniform(0.0, np.pi)
    brightness = rng.uniform(0.6, 0.9)

    target = target_layer(CLASS_SHAPES[class_id], size, center, angle, brightness)
    mask = target > MASK_THRESHOLD
    if mask.sum() < MIN_MASK_PIXELS:
        raise ValueError(f"scene for class {class_id} seed {rng_seed} has a target smaller than {MIN_MASK_PIXELS} pixels")

    scene = (geometry.clutter + target) * speckle((size, size), geometry.looks, rng)
    return LabeledImage(to_storage(scene), class_id, mask)


def generate_dataset(
    per_class: int,
    seed: int,
    geometry: SceneConfig = SceneConfig(),
    split: str = "train",
    threads: Optional[int] = 1,
) -> Dataset:
    """
    Synthesize per_class scenes of every class, interleaved by class.

    Args:
        per_class: Images per class
        seed: Dataset seed; train and test splits draw from separate streams
        geometry: Scene configuration (carries the class count)
        split: 'train' or 'test'
        threads: Worker cap for synthesis

    Returns:
        Dataset of class_count * per_class images
    """
    if per_class < 1:
        raise ValueError(f"per_class must be positive, got {per_class}")
    geometry.validate()
    count = per_class * geometry.class_count

    def make(index: int) -> LabeledImage:
        return generate_scene(index % geometry.class_count, derive_seed(seed, split, index), geometry)

    images = parallel_map(make, range(count), threads)
    logger.info(f"Generated {count} {split} scenes ({geometry.class_count} classes, {geometry.size}px)")
    return Dataset(images, geometry.class_count, split, seed)
