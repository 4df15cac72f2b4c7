"""
Tests for the architecture, parameters and the network forward pass.
"""

from dataclasses import replace

import numpy as np
import pytest

from factual.autodiff import backward
from factual.autodiff import functional as F
from factual.errors import ShapeError
from factual.model import ArchitectureConfig, ModelParams, accuracy, classify, encode, init_params, predict, project
from factual.model.params import CLASSIFIER, ENCODER, PROJECTOR


class TestArchitectureConfig:
    """Test cases for ArchitectureConfig."""

    def test_parameter_names_in_order(self, tiny_arch):
        """Test the declared parameter order: encoder, projector, classifier."""
        names = list(tiny_arch.parameter_shapes())

        assert names[0] == "encoder.conv1.weight"
        assert names[-2:] == ["classifier.weight", "classifier.bias"]
        assert tiny_arch.parameter_shapes()["encoder.conv2.weight"] == (8, 4, 3, 3)

    def test_residual_adds_blocks(self, tiny_arch):
        """Test that residual stages add their own conv parameters."""
        shapes = replace(tiny_arch, residual=True).parameter_shapes()
        assert shapes["encoder.res1.weight"] == (4, 4, 3, 3)

    @pytest.mark.parametrize(
        "changes",
        [{"class_count": 1}, {"image_size": 1}, {"representation_dim": 2}, {"channels": ()}],
    )
    def test_invalid(self, tiny_arch, changes):
        """Test that invalid dimensions raise ValueError."""
        with pytest.raises(ValueError):
            replace(tiny_arch, **changes)


class TestModelParams:
    """Test cases for ModelParams and init_params."""

    def test_init_is_deterministic(self, tiny_arch):
        """Test that the same seed gives bitwise-equal parameters."""
        assert init_params(tiny_arch, 4).equals(init_params(tiny_arch, 4))
        assert not init_params(tiny_arch, 4).equals(init_params(tiny_arch, 5))

    def test_biases_start_at_zero(self, tiny_params):
        """Test that every bias is initialized to zero."""
        for name, array in tiny_params.items():
            if name.endswith(".bias"):
                assert not array.any()

    def test_copy_is_independent(self, tiny_params):
        """Test that modifying a copy leaves the original untouched."""
        clone = tiny_params.copy()
        clone["classifier.bias"] = np.ones(4)

        assert not tiny_params["classifier.bias"].any()
        assert not clone.equals(tiny_params)

    def test_wrong_names_rejected(self, tiny_arch, tiny_params):
        """Test that arrays must match the architecture's names."""
        arrays = dict(tiny_params.items())
        arrays.pop("classifier.bias")
        with pytest.raises(ShapeError):
            ModelParams(tiny_arch, arrays)

    def test_wrong_shape_rejected(self, tiny_params):
        """Test that assigning a mis-shaped array raises ShapeError."""
        with pytest.raises(ShapeError):
            tiny_params["classifier.bias"] = np.ones(5)

    def test_substitute(self, tiny_params):
        """Test that a substituted tensor is used in place of the stored parameter."""
        from factual.autodiff import Tensor

        replacement = Tensor(np.ones(4))
        bound = tiny_params.bind().substitute("classifier.bias", replacement)

        assert bound["classifier.bias"] is replacement
        with pytest.raises(ShapeError):
            bound.substitute("classifier.bias", Tensor(np.ones(5)))

    def test_group_prefixes(self, tiny_params):
        """Test that the three groups partition the parameters."""
        groups = tiny_params.names(ENCODER) + tiny_params.names(PROJECTOR) + tiny_params.names(CLASSIFIER)
        assert sorted(groups) == sorted(tiny_params)


class TestNetwork:
    """Test cases for encode, project, classify and predict."""

    def test_output_shapes(self, tiny_params):
        """Test representation, projection and logit shapes."""
        images = np.random.default_rng(0).uniform(size=(3, 16, 16))
        h = encode(tiny_params, images)

        assert h.shape == (3, 8)
        assert project(tiny_params, h).shape == (3, 4)
        assert classify(tiny_params, h).shape == (3, 4)

    def test_projection_is_unit_norm(self, tiny_params):
        """Test that projector outputs are L2-normalized."""
        z = project(tiny_params, encode(tiny_params, np.random.default_rng(1).uniform(size=(5, 16, 16))))
        assert np.allclose(np.linalg.norm(z.data, axis=1), 1.0)

    def test_wrong_image_size(self, tiny_params):
        """Test that images of another size raise ShapeError."""
        with pytest.raises(ShapeError):
            encode(tiny_params, np.zeros((2, 8, 8)))

    def test_classification_does_not_read_projector(self, tiny_arch):
        """Test that the classification path never reads projector parameters."""
        params = init_params(tiny_arch, 2)
        predict(params, np.zeros((2, 16, 16)))

        assert params.access_log
        assert not any(name.startswith(PROJECTOR) for name in params.access_log)

    def test_trainable_gradients(self, tiny_params):
        """Test that only trainable parameters receive gradients, zeros included."""
        bound = tiny_params.bind(tiny_params.names(CLASSIFIER))
        logits = classify(bound, encode(bound, np.random.default_rng(2).uniform(size=(2, 16, 16))))
        backward(F.tsum(logits))
        grads = bound.grads()

        assert sorted(grads) == sorted(tiny_params.names(CLASSIFIER))
        assert grads["classifier.weight"].shape == (8, 4)

    def test_predict_and_accuracy(self, tiny_params):
        """Test predictions are class indices and accuracy is a percentage."""
        images = np.random.default_rng(3).uniform(size=(4, 16, 16))
        predictions = predict(tiny_params, images)

        assert predictions.shape == (4,)
        assert set(predictions.tolist()) <= {0, 1, 2, 3}
        assert accuracy(tiny_params, images, predictions) == 100.0
        assert accuracy(tiny_params, images[:0], np.zeros(0)) == 0.0

    def test_residual_forward(self, tiny_arch):
        """Test that a residual network produces representations of width D."""
        params = init_params(replace(tiny_arch, residual=True), 1)
        assert encode(params, np.zeros((1, 16, 16))).shape == (1, 8)
