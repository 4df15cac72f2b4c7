"""
Synthetic scenes, augmentation, triple construction and dataset files.
"""

from .images import (
    MIN_MASK_PIXELS,
    VIEW_TAGS,
    AugmentedTriple,
    Dataset,
    LabeledImage,
    TripleSet,
    to_storage,
)
from .scenes import CLASS_SHAPES, SceneConfig, generate_dataset, generate_scene, speckle
from .augment import AugmentConfig, random_augment
from .triples import build_triples, perturb_dataset
from .io import load_dataset, save_dataset

__all__ = [
    "MIN_MASK_PIXELS",
    "VIEW_TAGS",
    "LabeledImage",
    "Dataset",
    "AugmentedTriple",
    "TripleSet",
    "to_storage",
    "CLASS_SHAPES",
    "SceneConfig",
    "speckle",
    "generate_scene",
    "generate_dataset",
    "AugmentConfig",
    "random_augment",
    "build_triples",
    "perturb_dataset",
    "save_dataset",
    "load_dataset",
]
