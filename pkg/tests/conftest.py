"""
Pytest configuration and fixtures for factual tests.
"""

import numpy as np
import pytest

from factual.attacks import AttackConfig, linear_softmax_scorer
from factual.data import SceneConfig, generate_dataset
from factual.model import ArchitectureConfig, init_params
from factual.pipeline import TrainConfig

TINY_CONFIG_YAML = """\
data:
  size: 16
  class_count: 4
  per_class: 2
  test_per_class: 1
model:
  channels: [4, 8]
  representation_dim: 8
  projector_hidden: 8
  projector_dim: 4
train:
  epochs: 1
  batch_size: 4
pgd:
  steps: 2
otsa:
  steps: 2
run:
  threads: 1
"""


@pytest.fixture(scope="session")
def tiny_arch():
    """A two-stage network small enough for per-test training runs."""
    return ArchitectureConfig(
        image_size=16,
        channels=(4, 8),
        representation_dim=8,
        projector_hidden=8,
        projector_dim=4,
        class_count=4,
    )


@pytest.fixture
def tiny_params(tiny_arch):
    """Freshly initialized parameters for tiny_arch."""
    return init_params(tiny_arch, 0)


@pytest.fixture(scope="session")
def scene_config():
    return SceneConfig(size=16, class_count=4)


@pytest.fixture(scope="session")
def train_set(scene_config):
    """Eight 16x16 training scenes, two per class."""
    return generate_dataset(2, seed=7, geometry=scene_config, split="train")


@pytest.fixture(scope="session")
def test_set(scene_config):
    """Four 16x16 test scenes, one per class."""
    return generate_dataset(1, seed=7, geometry=scene_config, split="test")


@pytest.fixture
def fast_config():
    """One epoch of two batches with short attacks."""
    return TrainConfig(
        epochs=1,
        batch_size=4,
        pgd=AttackConfig(steps=2),
        otsa=AttackConfig(steps=2),
        threads=1,
    )


@pytest.fixture
def linear_problem():
    """A random 3-class linear softmax scorer with 12 images of 16x16 and their labels."""
    rng = np.random.default_rng(11)
    scorer = linear_softmax_scorer(rng.normal(size=(256, 3)), rng.normal(size=3))
    images = rng.uniform(0.0, 1.0, size=(12, 16, 16))
    labels = rng.integers(0, 3, size=12)
    return scorer, images, labels


@pytest.fixture
def block_masks():
    """5x5 target blocks at varying offsets for 12 images of 16x16."""
    masks = np.zeros((12, 16, 16), dtype=bool)
    for b in range(12):
        top, left = 2 + b % 8, 9 - b % 7
        masks[b, top:top + 5, left:left + 5] = True
    return masks


@pytest.fixture
def tiny_config_file(tmp_path):
    """A YAML config sized for end-to-end CLI runs."""
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY_CONFIG_YAML)
    return path
