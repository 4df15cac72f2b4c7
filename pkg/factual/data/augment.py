"""
Random two-view augmentation for single-channel scenes.

Draws resized-crop, horizontal flip, brightness and contrast jitter. Color,
saturation and hue are the identity on grayscale data and therefore absent.
Geometric transforms move the target mask in lockstep with the pixels.
"""

from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np

from ..config import logger
from .images import MIN_MASK_PIXELS, LabeledImage, to_storage

MAX_CROP_ATTEMPTS = 50


@dataclass(frozen=True)
class AugmentConfig:
    """
    Augmentation strengths.

    Attributes:
        crop_scale: Range of the crop area as a fraction of the image
        flip_prob: Probability of a horizontal flip
        brightness: Maximum additive brightness shift (drawn from +-brightness)
        contrast: Range of the multiplicative contrast factor about the mean
        jitter_prob: Probability each of brightness and contrast is applied
    """

    crop_scale: Tuple[float, float] = (0.8, 1.0)
    flip_prob: float = 0.5
    brightness: float = 0.2
    contrast: Tuple[float, float] = (0.8, 1.25)
    jitter_prob: float = 0.8

    @classmethod
    def identity(cls) -> "AugmentConfig":
        """Configuration under which random_augment returns its input unchanged."""
        return cls(crop_scale=(1.0, 1.0), flip_prob=0.0, brightness=0.0, contrast=(1.0, 1.0), jitter_prob=0.0)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["crop_scale"] = list(self.crop_scale)
        data["contrast"] = list(self.contrast)
        return data


def adjust_brightness(pixels: np.ndarray, delta: float) -> np.ndarray:
    return np.clip(pixels + delta, 0.0, 1.0)


def adjust_contrast(pixels: np.ndarray, factor: float) -> np.ndarray:
    center = pixels.mean()
    return np.clip(center + factor * (pixels - center), 0.0, 1.0)


def horizontal_flip(pixels: np.ndarray, mask: np.ndarray):
    return pixels[:, ::-1].copy(), mask[:, ::-1].copy()


def resized_crop(pixels: np.ndarray, mask: np.ndarray, top: int, left: int, side: int):
    """
    Crop a side x side window and resample it back to the full size.

    Pixels use bilinear interpolation, the mask nearest-neighbour.
    """
    size = pixels.shape[0]
    if side == size:
        return pixels.copy(), mask.copy()
    # sample positions in the crop's pixel grid
    coords = (np.arange(size) + 0.5) * side / size - 0.5
    coords = np.clip(coords, 0.0, side - 1.0)
    low = np.floor(coords).astype(np.int64)
    high = np.minimum(low + 1, side - 1)
    frac = coords - low

    window = pixels[top:top + side, left:left + side].astype(np.float64)
    rows_low, rows_high = window[low], window[high]
    vertical = rows_low + (rows_high - rows_low) * frac[:, None]
    resampled = vertical[:, low] + (vertical[:, high] - vertical[:, low]) * frac[None, :]

    nearest = np.clip(np.round(coords).astype(np.int64), 0, side - 1)
    resampled_mask = mask[top:top + side, left:left + side][np.ix_(nearest, nearest)]
    return resampled, resampled_mask


def random_augment(image: LabeledImage, rng_seed: int, config: AugmentConfig = AugmentConfig()) -> LabeledImage:
    """
    Draw one random view of an image; deterministic per seed.

    The crop window is redrawn until the resampled mask keeps at least 16
    target pixels; after MAX_CROP_ATTEMPTS the crop is skipped.
    """
    image.validate()
    rng = np.random.default_rng(rng_seed)
    pixels = image.pixels.astype(np.float64)
    mask = image.mask
    size = pixels.shape[0]

    lo, hi = config.crop_scale
    for _ in range(MAX_CROP_ATTEMPTS):
        side = int(round(size * np.sqrt(rng.uniform(lo, hi))))
        side = min(max(side, 2), size)
        top = int(rng.integers(0, size - side + 1))
        left = int(rng.integers(0, size - side + 1))
        cropped, cropped_mask = resized_crop(pixels, mask, top, left, side)
        if cropped_mask.sum() >= MIN_MASK_PIXELS:
            pixels, mask = cropped, cropped_mask
            break
    else:
        logger.debug(f"no crop kept the target after {MAX_CROP_ATTEMPTS} draws; skipping crop")

    if rng.uniform() < config.flip_prob:
        pixels, mask = horizontal_flip(pixels, mask)
    if rng.uniform() < config.jitter_prob:
        pixels = adjust_brightness(pixels, rng.uniform(-config.brightness, config.brightness))
    if rng.uniform() < config.jitter_prob:
        pixels = adjust_contrast(pixels, rng.uniform(*config.contrast))

    return LabeledImage(to_storage(pixels), image.label, mask)
