"""
Tests for the supervised contrastive and cross-entropy losses.
"""

import math

import numpy as np
import pytest

from factual.autodiff import Tensor, backward
from factual.autodiff import functional as F
from factual.errors import FactualError, ShapeError
from factual.losses import (
    SclBatch,
    cross_entropy_loss,
    supervised_contrastive_loss,
    supervised_contrastive_loss_reference,
)
from factual.selftest import random_scl_batch


def unit_rows(rng, size, dim):
    features = rng.normal(size=(size, dim))
    return features / np.linalg.norm(features, axis=1, keepdims=True)


class TestSupervisedContrastiveLoss:
    """Test cases for supervised_contrastive_loss."""

    def test_matches_reference(self):
        """Test the vectorized loss against the double-loop definition."""
        rng = np.random.default_rng(5)
        for _ in range(20):
            features, labels = random_scl_batch(rng)
            fast = supervised_contrastive_loss(SclBatch(Tensor(features), labels, 0.1)).item()
            slow = supervised_contrastive_loss_reference(features, labels, 0.1)
            assert abs(fast - slow) < 1e-8

    def test_identical_pair_is_zero(self):
        """Test that two identical views with the same label give exactly zero."""
        f = np.array([[0.6, 0.8], [0.6, 0.8]])
        loss = supervised_contrastive_loss(SclBatch(Tensor(f), np.array([3, 3]), 0.1))

        assert loss.item() == 0.0

    def test_anchors_without_positives_are_skipped(self):
        """Test that a singleton class does not contribute an anchor term."""
        features = unit_rows(np.random.default_rng(1), 3, 4)
        labels = np.array([0, 0, 1])
        loss = supervised_contrastive_loss(SclBatch(Tensor(features), labels, 0.5)).item()

        assert np.isclose(loss, supervised_contrastive_loss_reference(features, labels, 0.5))

    def test_no_positive_pairs(self):
        """Test that a batch of distinct labels raises FactualError."""
        features = unit_rows(np.random.default_rng(2), 3, 4)
        with pytest.raises(FactualError, match="no positive pairs"):
            supervised_contrastive_loss(SclBatch(Tensor(features), np.array([0, 1, 2])))

    def test_rows_must_be_unit_norm(self):
        """Test that unnormalized representations are rejected."""
        with pytest.raises(FactualError):
            supervised_contrastive_loss(SclBatch(Tensor(np.ones((2, 2))), np.array([0, 0])))

    def test_temperature_must_be_positive(self):
        """Test that tau <= 0 raises ValueError."""
        features = unit_rows(np.random.default_rng(3), 2, 2)
        with pytest.raises(ValueError):
            supervised_contrastive_loss(SclBatch(Tensor(features), np.array([0, 0]), 0.0))

    def test_label_shape(self):
        """Test that mismatched labels raise ShapeError."""
        features = unit_rows(np.random.default_rng(4), 3, 2)
        with pytest.raises(ShapeError):
            supervised_contrastive_loss(SclBatch(Tensor(features), np.array([0, 0])))

    def test_gradient_flows_through_normalization(self):
        """Test that gradients reach raw features through l2_normalize."""
        raw = Tensor(np.random.default_rng(6).normal(size=(4, 3)), requires_grad=True)
        loss = supervised_contrastive_loss(SclBatch(F.l2_normalize(raw), np.array([0, 0, 1, 1])))
        backward(loss)

        assert raw.grad.shape == (4, 3)
        assert np.isfinite(raw.grad).all()
        assert np.abs(raw.grad).sum() > 0


class TestCrossEntropyLoss:
    """Test cases for cross_entropy_loss."""

    def test_uniform_logits(self):
        """Test that equal logits give log C."""
        loss = cross_entropy_loss(Tensor(np.zeros((2, 3))), [0, 2])
        assert np.isclose(loss.item(), math.log(3))

    def test_sum_reduction(self):
        """Test that sum reduction adds per-sample losses."""
        loss = cross_entropy_loss(Tensor(np.zeros((2, 3))), [0, 2], reduction="sum")
        assert np.isclose(loss.item(), 2 * math.log(3))

    def test_stable_for_large_logits(self):
        """Test that large logits do not overflow."""
        loss = cross_entropy_loss(Tensor([[1000.0, 0.0]]), [1])
        assert np.isclose(loss.item(), 1000.0)

    def test_gradient_is_softmax_minus_onehot(self):
        """Test the logits gradient of the mean reduction."""
        logits = np.array([[1.0, 2.0, 0.5], [0.0, -1.0, 3.0]])
        labels = np.array([1, 0])
        t = Tensor(logits, requires_grad=True)
        backward(cross_entropy_loss(t, labels))

        probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        probs[np.arange(2), labels] -= 1.0
        assert np.allclose(t.grad, probs / 2)

    def test_invalid_inputs(self):
        """Test label range, class count and reduction validation."""
        with pytest.raises(ValueError):
            cross_entropy_loss(Tensor(np.zeros((2, 3))), [0, 3])
        with pytest.raises(ValueError):
            cross_entropy_loss(Tensor(np.zeros((2, 1))), [0, 0])
        with pytest.raises(ValueError, match="Invalid reduction"):
            cross_entropy_loss(Tensor(np.zeros((2, 3))), [0, 1], reduction="max")
