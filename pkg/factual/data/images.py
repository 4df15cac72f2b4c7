"""
Labeled images, datasets and augmented triples.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

MIN_MASK_PIXELS = 16
SPLITS = ("train", "test")


@dataclass(eq=False)
class LabeledImage:
    """
    Grayscale image with its class label and target mask.

    Attributes:
        pixels: H x W float32 intensities in [0, 1]
        label: Class index
        mask: H x W booleans marking the target region
    """

    pixels: np.ndarray
    label: int
    mask: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        self.mask = np.asarray(self.mask, dtype=bool)
        self.label = int(self.label)

    @property
    def shape(self):
        return self.pixels.shape

    def validate(self, class_count: Optional[int] = None) -> "LabeledImage":
        """
        Check the image invariants.

        Raises:
            ValueError: On non-finite or out-of-range pixels, a mask with fewer
                than 16 pixels, a shape mismatch or a label out of range
        """
        if self.pixels.ndim != 2 or self.mask.shape != self.pixels.shape:
            raise ValueError(f"pixels {self.pixels.shape} and mask {self.mask.shape} must be matching 2-D arrays")
        if not np.isfinite(self.pixels).all() or self.pixels.min() < 0 or self.pixels.max() > 1:
            raise ValueError("pixel values must be finite and within [0, 1]")
        if int(self.mask.sum()) < MIN_MASK_PIXELS:
            raise ValueError(f"mask has {int(self.mask.sum())} pixels, at least {MIN_MASK_PIXELS} required")
        if self.label < 0 or (class_count is not None and self.label >= class_count):
            raise ValueError("label out of range")
        return self

    def with_pixels(self, pixels: np.ndarray, mask: Optional[np.ndarray] = None) -> "LabeledImage":
        return LabeledImage(pixels, self.label, self.mask if mask is None else mask)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledImage):
            return NotImplemented
        return (
            self.label == other.label
            and np.array_equal(self.pixels, other.pixels)
            and np.array_equal(self.mask, other.mask)
        )


@dataclass
class Dataset:
    """
    A list of labeled images sharing one shape.

    Attributes:
        images: The images
        class_count: Number of classes C
        split: 'train' or 'test'
        seed: Generator seed (provenance only; not persisted, not compared)
    """

    images: List[LabeledImage]
    class_count: int
    split: str = "train"
    seed: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"Invalid split '{self.split}'. Must be one of: {', '.join(SPLITS)}")
        if self.class_count < 1:
            raise ValueError("class_count must be positive")

    def __len__(self) -> int:
        return len(self.images)

    def __getitem__(self, index: int) -> LabeledImage:
        return self.images[index]

    @property
    def image_shape(self):
        return self.images[0].shape if self.images else None

    def pixels(self) -> np.ndarray:
        """All images as an (N, H, W) float64 array."""
        return np.stack([image.pixels for image in self.images]).astype(np.float64)

    def labels(self) -> np.ndarray:
        return np.array([image.label for image in self.images], dtype=np.int64)

    def masks(self) -> np.ndarray:
        return np.stack([image.mask for image in self.images])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels(), minlength=self.class_count)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset([self.images[i] for i in indices], self.class_count, self.split, self.seed)

    def validate(self) -> "Dataset":
        shapes = {image.shape for image in self.images}
        if len(shapes) > 1:
            raise ValueError(f"images have mixed shapes: {sorted(shapes)}")
        for image in self.images:
            image.validate(self.class_count)
        return self


@dataclass(eq=False)
class AugmentedTriple:
    """
    The clean image, its two augmented views and their perturbed versions.

    Attributes:
        clean: x
        view1: x1, attacked with PGD over the whole image
        view2: x2, attacked with scatterers on the target
        z_img: x1 + delta_img
        z_obj: x2 + delta_obj
        provenance: Attack configurations and seeds used
    """

    clean: LabeledImage
    view1: LabeledImage
    view2: LabeledImage
    z_img: LabeledImage
    z_obj: LabeledImage
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def label(self) -> int:
        return self.clean.label

    def members(self) -> List[LabeledImage]:
        """The three training members (x, z_obj, z_img)."""
        return [self.clean, self.z_obj, self.z_img]


VIEW_TAGS = {"clean": 0, "z_obj": 1, "z_img": 2}


@dataclass
class TripleSet:
    """Column-wise storage of triples: three aligned datasets."""

    clean: Dataset
    z_obj: Dataset
    z_img: Dataset

    def __post_init__(self):
        if not len(self.clean) == len(self.z_obj) == len(self.z_img):
            raise ValueError("triple columns must have equal length")

    def __len__(self) -> int:
        return len(self.clean)

    @classmethod
    def from_triples(cls, triples: Sequence[AugmentedTriple], class_count: int, split: str = "train") -> "TripleSet":
        return cls(
            Dataset([t.clean for t in triples], class_count, split),
            Dataset([t.z_obj for t in triples], class_count, split),
            Dataset([t.z_img for t in triples], class_count, split),
        )

    def flattened(self) -> Dataset:
        """I = I_ori u I_obj u I_img as one dataset of 3N images."""
        return Dataset(
            self.clean.images + self.z_obj.images + self.z_img.images,
            self.clean.class_count,
            self.clean.split,
            self.clean.seed,
        )


def to_storage(values: np.ndarray, origin: Optional[np.ndarray] = None, epsilon: Optional[float] = None) -> np.ndarray:
    """
    Round float64 pixels to float32 storage, clipped to [0, 1].

    With origin and epsilon, any coordinate that rounding pushed past the
    budget is moved one float32 step back toward origin.
    """
    stored = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0).astype(np.float32)
    if origin is not None and epsilon is not None:
        origin = np.asarray(origin, dtype=np.float32)
        over = np.abs(stored.astype(np.float64) - origin.astype(np.float64)) > epsilon
        if over.any():
            stored[over] = np.nextafter(stored[over], origin[over])
    return stored
